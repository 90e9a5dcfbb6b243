#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reasonrec/eval_record.hpp"
#include "reasonrec/gateway.hpp"

namespace reasonrec {

struct AucResult {
  double auc = 0.5;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t tied_pairs = 0;  // positive-negative pairs with equal scores
};

// Mann-Whitney AUC with midranks: (wins + ties/2) / (positives * negatives).
// Throws when the lengths differ or only one class is present.
AucResult binary_auc(std::span<const double> scores, std::span<const int> labels);
AucResult binary_auc(std::span<const double> scores, std::span<const BinaryLabel> labels);

struct SimilarityScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const SimilarityScore&) const = default;
};

// Optional per-token weight (e.g. IDF); absent means uniform.
using TokenWeight = std::function<double(const std::string&)>;

// Greedy matching over cosine similarity of unit vectors: precision averages
// each candidate token's best match in the reference, recall the converse.
SimilarityScore greedy_match_score(const TokenEmbeddings& candidate, const TokenEmbeddings& reference,
                                   const TokenWeight& weight = {});

struct ReportRow {
  std::string variant;
  std::optional<double> auc;  // absent when one class is missing
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t n = 0;
  std::size_t parse_failures = 0;
  double parse_fail_rate = 0.0;
  std::size_t degenerate_scores = 0;  // scored without logprobs
  std::optional<double> mean_f1;
  std::optional<double> mean_precision;
  std::optional<double> mean_recall;
  std::size_t similarity_n = 0;
  std::optional<std::size_t> k_shot;
  std::optional<std::uint64_t> seed;
};

struct Report {
  ReportRow overall;
  std::vector<ReportRow> by_variant;  // sorted by variant
};

struct RunInfo {
  std::optional<std::size_t> k_shot;
  std::optional<std::uint64_t> seed;
};

// `sims`, when given, is parallel to `records`; entries may be empty where no
// reference reasoning was available. Failed parses count towards
// parse_fail_rate but not AUC.
Report aggregate_report(const std::vector<EvalRecord>& records,
                        const std::optional<std::vector<std::optional<SimilarityScore>>>& sims, const RunInfo& info);

nlohmann::json to_json(const ReportRow& row);
nlohmann::json to_json(const Report& report);
std::string to_csv(const Report& report);

}  // namespace reasonrec
