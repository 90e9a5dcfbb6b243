#pragma once

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace reasonrec {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Calls `fn(line_number, record)` for each non-blank line. Lines that are not
// valid JSON raise ParseError with the file and 1-based line number.
void for_each_jsonl(const fs::path& path, const std::function<void(std::size_t, const json&)>& fn);

std::vector<json> read_jsonl(const fs::path& path);

// One compact record per line, trailing newline after every record.
std::string to_jsonl(const std::vector<json>& records);

std::string read_file(const fs::path& path);

// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const fs::path& path, const std::string& content);

}  // namespace reasonrec
