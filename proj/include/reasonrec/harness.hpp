#pragma once

#include <cstddef>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reasonrec/eval_record.hpp"
#include "reasonrec/gateway.hpp"
#include "reasonrec/generation.hpp"
#include "reasonrec/metrics.hpp"

namespace reasonrec {

struct ParsedPrediction {
  std::optional<BinaryLabel> label;
  std::string remainder;  // text after the yes/no token, leading whitespace dropped
  ParseStatus status = ParseStatus::failed;
};

// Looks for "Prediction" followed by an optional separator and Yes/No (any
// case, markdown bold tolerated). Without that anchor, a standalone yes/no
// among the first 10 words is accepted with status `fallback`.
ParsedPrediction parse_prediction(std::string_view text);

inline constexpr std::size_t kFallbackWindow = 10;

struct ScoreResult {
  std::optional<double> score;
  bool from_logprobs = false;
};

// P(Yes) / (P(Yes) + P(No)) at the first generated position offering either
// token; falls back to 1.0 / 0.0 from `predicted` when no logprobs are usable.
ScoreResult score_from_logprobs(const LlmResponse& response, std::optional<BinaryLabel> predicted);

struct EvalOptions {
  TemplateId variant;
  TaskKind task = TaskKind::zero_shot_predict;
  std::size_t parallelism = 4;
  std::size_t chunk_size = 32;
  // When set, partial records and a resume cursor live here.
  std::optional<std::filesystem::path> state_dir;
};

struct EvalInputs {
  const Corpus* corpus = nullptr;
  const PromptBuilder* builder = nullptr;
  Gateway* gateway = nullptr;
  const ArtifactStore* descriptions = nullptr;
  const ArtifactStore* profiles = nullptr;
  const ArtifactStore* reasoning = nullptr;  // optional, source of references
};

// One record per example, sorted by user_id then split. A transport failure
// leaves the completed chunks in state_dir so a rerun resumes after them.
std::vector<EvalRecord> run_eval(const std::vector<SplitExample>& examples, const EvalInputs& inputs,
                                 const EvalOptions& options);

nlohmann::json to_json(const EvalRecord& record, const std::optional<SimilarityScore>& similarity = std::nullopt);
EvalRecord eval_record_from_json(const nlohmann::json& j);

struct EvalFile {
  nlohmann::json meta;
  std::vector<EvalRecord> records;
  std::vector<std::optional<SimilarityScore>> similarity;  // parallel to records
};

// Meta header line followed by one record per line.
std::string serialize_eval(const nlohmann::json& meta, const std::vector<EvalRecord>& records,
                           const std::vector<std::optional<SimilarityScore>>& similarity = {});
EvalFile load_eval(const std::filesystem::path& path);

// Greedy-match similarity of each record's reasoning against its reference;
// empty where either side is missing or has no tokens.
std::vector<std::optional<SimilarityScore>> similarity_scores(const std::vector<EvalRecord>& records,
                                                              Embedder& embedder);

}  // namespace reasonrec
