#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reasonrec {

// Maximal runs of non-whitespace characters.
std::vector<std::string_view> split_words(std::string_view text);

// First `limit` words rejoined with single spaces.
std::string trim_words(std::string_view text, std::size_t limit);

std::size_t word_count(std::string_view text);

std::string to_lower(std::string_view s);

std::string strip(std::string_view s);

// Split on a multi-character delimiter, keeping empty fields.
std::vector<std::string_view> split_on(std::string_view s, std::string_view delim);

}  // namespace reasonrec

namespace reasonrec {

// Returns `s` unchanged when it is valid UTF-8, otherwise reinterprets it as
// Latin-1 (the encoding of the classic MovieLens dumps) and transcodes.
std::string ensure_utf8(std::string_view s);

}  // namespace reasonrec
