#include "reasonrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "reasonrec/error.hpp"

namespace reasonrec {

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::fallback: return "fallback";
    case ParseStatus::failed: return "failed";
  }
  return "?";
}

ParseStatus parse_parse_status(std::string_view name) {
  if (name == "ok") return ParseStatus::ok;
  if (name == "fallback") return ParseStatus::fallback;
  if (name == "failed") return ParseStatus::failed;
  throw Error("unknown parse status '" + std::string(name) + "'");
}

AucResult binary_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("binary_auc: scores and labels differ in length");
  if (scores.empty()) throw Error("AUC undefined: no records");
  AucResult res;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("binary_auc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw Error("binary_auc: NaN score");
    (labels[i] ? res.positives : res.negatives)++;
  }
  if (res.positives == 0 || res.negatives == 0) throw Error("AUC undefined: single-class input");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks (1-based) of the positives.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg)++;
      ++j;
    }
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    positive_rank_sum += midrank * static_cast<double>(pos);
    res.tied_pairs += pos * neg;
    i = j;
  }
  const double p = static_cast<double>(res.positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  res.auc = u / (p * static_cast<double>(res.negatives));
  return res;
}

AucResult binary_auc(std::span<const double> scores, std::span<const BinaryLabel> labels) {
  std::vector<int> ints(labels.size());
  std::transform(labels.begin(), labels.end(), ints.begin(), [](BinaryLabel l) { return l.value(); });
  return binary_auc(scores, std::span<const int>(ints));
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Weighted mean over `from` of each token's best similarity against `to`.
double directional(const TokenEmbeddings& from, const TokenEmbeddings& to, const TokenWeight& weight) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < from.vectors.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : to.vectors) best = std::max(best, dot(from.vectors[i], v));
    const double w = weight ? weight(from.tokens[i]) : 1.0;
    num += w * best;
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

SimilarityScore greedy_match_score(const TokenEmbeddings& candidate, const TokenEmbeddings& reference,
                                   const TokenWeight& weight) {
  if (candidate.vectors.empty() || reference.vectors.empty()) throw Error("similarity undefined: empty token list");
  const auto dim = candidate.vectors.front().size();
  for (const auto* side : {&candidate, &reference}) {
    if (side->tokens.size() != side->vectors.size()) throw Error("similarity: tokens and vectors differ in length");
    for (const auto& v : side->vectors) {
      if (v.size() != dim) throw Error("similarity: vectors differ in dimension");
    }
  }
  SimilarityScore s;
  s.precision = directional(candidate, reference, weight);
  s.recall = directional(reference, candidate, weight);
  const double denom = s.precision + s.recall;
  s.f1 = denom == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / denom;
  return s;
}

namespace {

ReportRow summarize(const std::string& variant, const std::vector<std::size_t>& idx,
                    const std::vector<EvalRecord>& records,
                    const std::optional<std::vector<std::optional<SimilarityScore>>>& sims, const RunInfo& info) {
  ReportRow row;
  row.variant = variant;
  row.n = idx.size();
  row.k_shot = info.k_shot;
  row.seed = info.seed;
  std::vector<double> scores;
  std::vector<int> labels;
  double sp = 0.0, sr = 0.0, sf = 0.0;
  for (auto i : idx) {
    const auto& r = records[i];
    if (r.parse_status == ParseStatus::failed || !r.score) {
      ++row.parse_failures;
    } else {
      scores.push_back(*r.score);
      labels.push_back(r.gold.value());
      if (!r.score_from_logprobs) ++row.degenerate_scores;
    }
    if (sims && (*sims)[i]) {
      sp += (*sims)[i]->precision;
      sr += (*sims)[i]->recall;
      sf += (*sims)[i]->f1;
      ++row.similarity_n;
    }
  }
  row.parse_fail_rate = row.n ? static_cast<double>(row.parse_failures) / static_cast<double>(row.n) : 0.0;
  for (int l : labels) (l ? row.positives : row.negatives)++;
  if (row.positives > 0 && row.negatives > 0) row.auc = binary_auc(scores, labels).auc;
  if (sims && row.similarity_n > 0) {
    const double k = static_cast<double>(row.similarity_n);
    row.mean_precision = sp / k;
    row.mean_recall = sr / k;
    row.mean_f1 = sf / k;
  }
  return row;
}

}  // namespace

Report aggregate_report(const std::vector<EvalRecord>& records,
                        const std::optional<std::vector<std::optional<SimilarityScore>>>& sims, const RunInfo& info) {
  if (records.empty()) throw Error("aggregate_report: no records");
  if (sims && sims->size() != records.size()) throw Error("aggregate_report: similarity list length mismatch");
  std::vector<std::size_t> all(records.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::map<std::string, std::vector<std::size_t>> groups;
  for (auto i : all) groups[records[i].variant].push_back(i);

  Report report;
  report.overall = summarize(groups.size() == 1 ? groups.begin()->first : "all", all, records, sims, info);
  for (const auto& [variant, idx] : groups) report.by_variant.push_back(summarize(variant, idx, records, sims, info));
  return report;
}

nlohmann::json to_json(const ReportRow& row) {
  nlohmann::json j = {{"variant", row.variant},
                      {"auc", row.auc ? nlohmann::json(*row.auc) : nlohmann::json(nullptr)},
                      {"positives", row.positives},
                      {"negatives", row.negatives},
                      {"n", row.n},
                      {"parse_failures", row.parse_failures},
                      {"parse_fail_rate", row.parse_fail_rate},
                      {"degenerate_scores", row.degenerate_scores},
                      {"k_shot", row.k_shot ? nlohmann::json(*row.k_shot) : nlohmann::json(nullptr)},
                      {"seed", row.seed ? nlohmann::json(*row.seed) : nlohmann::json(nullptr)}};
  if (row.mean_f1) {
    j["mean_f1"] = *row.mean_f1;
    j["mean_precision"] = *row.mean_precision;
    j["mean_recall"] = *row.mean_recall;
    j["similarity_n"] = row.similarity_n;
  }
  return j;
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.by_variant) rows.push_back(to_json(r));
  nlohmann::json j = to_json(report.overall);
  j["by_variant"] = rows;
  return j;
}

std::string to_csv(const Report& report) {
  std::ostringstream out;
  out.precision(17);
  out << "auc,positives,negatives,mean_f1,mean_precision,mean_recall,parse_fail_rate,n,variant,k_shot,seed\n";
  auto opt = [&](const auto& v) {
    if (v) out << *v;
  };
  auto row = [&](const ReportRow& r) {
    opt(r.auc);
    out << ',' << r.positives << ',' << r.negatives << ',';
    opt(r.mean_f1);
    out << ',';
    opt(r.mean_precision);
    out << ',';
    opt(r.mean_recall);
    out << ',' << r.parse_fail_rate << ',' << r.n << ',' << r.variant << ',';
    opt(r.k_shot);
    out << ',';
    opt(r.seed);
    out << '\n';
  };
  row(report.overall);
  for (const auto& r : report.by_variant) row(r);
  return out.str();
}

}  // namespace reasonrec
