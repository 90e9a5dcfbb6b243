#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "reasonrec/corpus.hpp"

namespace reasonrec {

enum class Split { train = 0, valid = 1, test = 2 };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitExample {
  std::string user_id;
  Interaction target;
  std::vector<Interaction> history;  // chronological, all before target
  Split split = Split::train;
  std::size_t target_index = 0;      // position of target in the user sequence

  bool operator==(const SplitExample&) const = default;
};

struct SplitReport {
  std::size_t users_split = 0;
  std::size_t users_skipped = 0;
};

// Leave-one-out: per user with n >= 3 interactions, train targets position
// n-3, valid n-2, test n-1 (0-based); each history is the up-to-k
// interactions immediately preceding its target.
std::vector<SplitExample> split_corpus(const Corpus& corpus, std::size_t history_k,
                                       SplitReport* report = nullptr);

// Manifest records: user_id, split, target_item, target_label, history_items,
// history_labels, target_index.
std::string serialize_manifest(const std::vector<SplitExample>& examples);

// Rebuilds examples against the corpus they were cut from.
std::vector<SplitExample> load_manifest(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace reasonrec
