#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace reasonrec {

struct SyntheticSpec {
  std::size_t users = 50;
  std::size_t items = 120;
  std::size_t min_interactions = 5;
  std::size_t max_interactions = 14;
  std::uint64_t seed = 2024;
};

struct SyntheticFiles {
  std::string reviews;   // review JSON lines
  std::string metadata;  // metadata JSON lines
};

// Product-style corpus in the review/metadata JSON-lines layout. Every item is
// reviewed at least once; popularity is skewed so some items carry more than
// ten reviews. A few records exercise the loader: a fractional rating, a
// review with only a summary, one unusable record, an item without metadata
// and a non-ASCII title.
SyntheticFiles make_synthetic(const SyntheticSpec& spec = {});

// Writes `reviews.jsonl` and `meta.jsonl` under `dir`.
void write_synthetic(const std::filesystem::path& dir, const SyntheticSpec& spec = {});

}  // namespace reasonrec
