#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "reasonrec/error.hpp"
#include "reasonrec/metrics.hpp"

using namespace reasonrec;

namespace {

// Pair-counting definition, independent of the rank formula.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

TokenEmbeddings embed(std::vector<std::vector<double>> v) {
  TokenEmbeddings e;
  for (std::size_t i = 0; i < v.size(); ++i) e.tokens.push_back("t" + std::to_string(i));
  e.vectors = std::move(v);
  return e;
}

EvalRecord record(const std::string& user, int gold, std::optional<int> pred, std::optional<double> score,
                  const std::string& variant = "reasoning_rec/products/v1") {
  EvalRecord r;
  r.user_id = user;
  r.item_id = "i";
  r.gold = BinaryLabel(gold);
  if (pred) r.predicted = BinaryLabel(*pred);
  r.score = score;
  r.score_from_logprobs = score.has_value();
  r.parse_status = pred ? ParseStatus::ok : ParseStatus::failed;
  r.variant = variant;
  return r;
}

}  // namespace

TEST_CASE("AUC of a three-point example") {
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<int> y{1, 0, 1};
  // Pairs (0.9 vs 0.8) win, (0.3 vs 0.8) lose.
  CHECK(binary_auc(s, y).auc == 0.5);
}

TEST_CASE("AUC counts ties as half") {
  const std::vector<double> s{0.5, 0.5, 0.5, 0.5};
  const std::vector<int> y{1, 0, 1, 0};
  const auto r = binary_auc(s, y);
  CHECK(r.auc == 0.5);
  CHECK(r.tied_pairs == 4);
  CHECK(binary_auc(std::vector<double>{1, 0}, std::vector<int>{1, 0}).auc == 1.0);
  CHECK(binary_auc(std::vector<double>{0, 1}, std::vector<int>{1, 0}).auc == 0.0);
}

TEST_CASE("AUC is undefined for one class") {
  CHECK_THROWS_AS(binary_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), Error);
  CHECK_THROWS_AS(binary_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), Error);
  CHECK_THROWS_AS(binary_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), Error);
}

TEST_CASE("AUC property: matches pair counting and ignores monotone transforms") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + gen() % 80;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 12) / 11.0;  // coarse grid forces ties
      y[i] = static_cast<int>(gen() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    const auto r = binary_auc(s, y);
    CHECK(std::abs(r.auc - brute_auc(s, y)) < 1e-12);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(std::abs(binary_auc(t, y).auc - r.auc) < 1e-12);
    // Flipping scores mirrors the AUC.
    for (std::size_t i = 0; i < n; ++i) t[i] = -s[i];
    CHECK(std::abs(binary_auc(t, y).auc - (1.0 - r.auc)) < 1e-12);
  }
}

TEST_CASE("greedy match on hand-computed vectors") {
  // Candidate tokens (1,0) and (0,1); reference (1,0) only.
  const auto cand = embed({{1, 0}, {0, 1}});
  const auto ref = embed({{1, 0}});
  const auto s = greedy_match_score(cand, ref);
  CHECK(s.precision == Catch::Approx(0.5));
  CHECK(s.recall == Catch::Approx(1.0));
  CHECK(s.f1 == Catch::Approx(2.0 / 3.0));
  const auto self = greedy_match_score(cand, cand);
  CHECK(self.f1 == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("greedy match with weights") {
  const auto cand = embed({{1, 0}, {0, 1}});
  const auto ref = embed({{1, 0}});
  const auto s = greedy_match_score(cand, ref, [](const std::string& t) { return t == "t0" ? 3.0 : 1.0; });
  CHECK(s.precision == Catch::Approx(0.75));
}

TEST_CASE("greedy match rejects empty or mismatched input") {
  CHECK_THROWS_AS(greedy_match_score(embed({}), embed({{1, 0}})), Error);
  CHECK_THROWS_AS(greedy_match_score(embed({{1, 0, 0}}), embed({{1, 0}})), Error);
}

TEST_CASE("report aggregates per variant and counts parse failures") {
  std::vector<EvalRecord> recs{record("a", 1, 1, 0.9), record("b", 0, 0, 0.2), record("c", 1, std::nullopt, std::nullopt),
                               record("d", 0, 1, 0.6, "vanilla/products/v1"), record("e", 1, 1, 0.8, "vanilla/products/v1")};
  std::vector<std::optional<SimilarityScore>> sims{SimilarityScore{1, 1, 1}, SimilarityScore{0.5, 0.5, 0.5}, std::nullopt,
                                                   std::nullopt, std::nullopt};
  const auto rep = aggregate_report(recs, sims, RunInfo{64, 42});
  CHECK(rep.overall.variant == "all");
  CHECK(rep.overall.n == 5);
  CHECK(rep.overall.parse_failures == 1);
  CHECK(rep.overall.parse_fail_rate == Catch::Approx(0.2));
  REQUIRE(rep.overall.auc);
  // Scored records: pos {0.9, 0.8}, neg {0.2, 0.6}: all four pairs won.
  CHECK(*rep.overall.auc == 1.0);
  CHECK(rep.overall.mean_f1 == Catch::Approx(0.75));
  CHECK(rep.overall.similarity_n == 2);
  REQUIRE(rep.by_variant.size() == 2);
  CHECK(rep.by_variant[0].variant == "reasoning_rec/products/v1");
  CHECK(rep.by_variant[1].n == 2);
  CHECK(*rep.overall.k_shot == 64);

  const auto csv = to_csv(rep);
  CHECK(csv.rfind("auc,positives,negatives,mean_f1,mean_precision,mean_recall,parse_fail_rate,n,variant,k_shot,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto j = to_json(rep);
  CHECK(j.at("by_variant").size() == 2);
  CHECK(j.at("auc") == 1.0);
}

TEST_CASE("report leaves AUC empty for a single class") {
  const auto rep = aggregate_report({record("a", 1, 1, 0.9), record("b", 1, 0, 0.1)}, std::nullopt, {});
  CHECK_FALSE(rep.overall.auc);
  CHECK_FALSE(rep.overall.mean_f1);
  CHECK(rep.overall.variant == "reasoning_rec/products/v1");
}
