#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "reasonrec/generation.hpp"

namespace reasonrec {

inline constexpr std::size_t kMaxSeqLen = 2048;
inline constexpr std::string_view kObjective = "maximize log P(q|p) over completion tokens";

struct InstructionPair {
  std::string id;  // "{user_id}:{split}"
  std::string user_id;
  std::string item_id;
  std::string prompt;
  std::string completion;
  BinaryLabel label{0};
  Split split = Split::train;
  std::string template_variant;

  bool operator==(const InstructionPair&) const = default;
};

// "Prediction: Yes|No" then a newline and the reasoning.
std::string format_completion(BinaryLabel label, std::string_view reasoning);

struct PairReport {
  std::size_t built = 0;
  std::vector<std::string> missing_reasoning;  // ids of skipped examples
  std::vector<std::string> over_length;        // ids flagged, still exported

  nlohmann::json to_json() const;
};

// Rough token estimate (about four bytes per token) used for the length flag.
std::size_t estimate_tokens(std::string_view text);

// One pair per example with a stored reasoning artifact; the prompt is the
// same prediction prompt the harness renders.
std::vector<InstructionPair> build_pairs(const std::vector<SplitExample>& examples, const Corpus& corpus,
                                         const PromptBuilder& builder, const ArtifactStore& descriptions,
                                         const ArtifactStore& profiles, const ArtifactStore& reasoning,
                                         const TemplateId& variant, PairReport* report = nullptr);

// Exactly K pairs drawn without replacement, in draw order. With `stratify`
// the label mix follows the input proportions (largest remainder).
std::vector<InstructionPair> sample_k_shot(const std::vector<InstructionPair>& train, std::size_t k,
                                           std::uint64_t seed, bool stratify = false);

struct ExportMeta {
  std::optional<std::size_t> k_shot;
  std::optional<std::uint64_t> seed;
};

std::string serialize_pairs(const std::vector<InstructionPair>& pairs, const ExportMeta& meta);
void export_jsonl(const std::vector<InstructionPair>& pairs, const std::filesystem::path& path,
                  const ExportMeta& meta);
std::vector<InstructionPair> import_jsonl(const std::filesystem::path& path, ExportMeta* meta = nullptr);

}  // namespace reasonrec
