#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "reasonrec/corpus.hpp"
#include "reasonrec/gateway.hpp"
#include "reasonrec/prompting.hpp"
#include "reasonrec/splitter.hpp"

namespace reasonrec {

inline constexpr std::size_t kDefaultDescriptionWords = 25;
inline constexpr std::size_t kDefaultProfileItems = 15;
inline constexpr std::size_t kDefaultProfileWords = 100;
inline constexpr std::size_t kDefaultKShot = 64;

// 20 for movies, 5 for products; used for both k-core and the history window.
int default_k_for(DatasetKind kind);

struct RunConfig {
  // [dataset]
  DatasetKind kind = DatasetKind::products;
  std::string category = "beauty";
  std::filesystem::path ratings;   // movies
  std::filesystem::path movies;    // movies
  std::filesystem::path plots;     // movies, optional
  std::filesystem::path reviews;   // products
  std::filesystem::path metadata;  // products
  int threshold = kDefaultThreshold;
  std::optional<int> k_core;

  // [pipeline]
  std::optional<int> history_k;
  std::size_t p = kDefaultReviewsPerItem;
  std::size_t n_words = kDefaultDescriptionWords;
  std::size_t m = kDefaultProfileItems;
  std::size_t q_words = kDefaultProfileWords;
  std::string variant = "v1";
  std::size_t parallelism = 4;
  std::uint64_t seed = 42;
  std::filesystem::path output_root = "runs/default";

  // [llm]
  BackendConfig backend;
  std::string embed_model;  // token-embedding model for the http embedder

  // [finetune]
  std::size_t k_shot = kDefaultKShot;
  bool stratify_labels = false;

  // [eval]
  std::string eval_variant = "v1";
  TaskKind eval_task = TaskKind::zero_shot_predict;
  Split eval_split = Split::test;
  bool similarity = true;
  int finetuned_max_new_tokens = 256;

  int effective_k_core() const { return k_core.value_or(default_k_for(kind)); }
  int effective_history_k() const { return history_k.value_or(default_k_for(kind)); }
};

// Reads a TOML file with [dataset] [pipeline] [llm] [finetune] [eval]
// sections over the defaults. Unknown keys are rejected.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");

// Throws ConfigError naming the first offending field. The registry, when
// given, must contain the configured variants.
void validate(const RunConfig& config, const TemplateRegistry* registry = nullptr);

// Resolved configuration; the API key is redacted.
nlohmann::json to_json(const RunConfig& config);

}  // namespace reasonrec
