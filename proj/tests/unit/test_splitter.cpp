#include <catch_amalgamated.hpp>

#include "reasonrec/splitter.hpp"
#include "support.hpp"

using namespace reasonrec;

TEST_CASE("leave-one-out targets the last three interactions") {
  const auto c = testing::corpus_with_counts({6});
  const auto ex = split_corpus(c, 2);
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].split == Split::train);
  CHECK(ex[0].target.item_id == "i3");
  CHECK(ex[1].target.item_id == "i4");
  CHECK(ex[2].target.item_id == "i5");
  // Train history is the two interactions before i3.
  REQUIRE(ex[0].history.size() == 2);
  CHECK(ex[0].history[0].item_id == "i1");
  CHECK(ex[0].history[1].item_id == "i2");
  // Test history ends at valid's target.
  CHECK(ex[2].history.back().item_id == "i4");
}

TEST_CASE("users with fewer than three interactions are skipped") {
  SplitReport rep;
  const auto ex = split_corpus(testing::corpus_with_counts({2, 3, 0}), 20, &rep);
  CHECK(rep.users_skipped == 2);
  CHECK(rep.users_split == 1);
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].history.empty());
  CHECK(ex[2].history.size() == 2);
}

TEST_CASE("split property: matches a slicing oracle on random sequences") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(gen() % 40);
    const std::size_t k = 1 + gen() % 25;
    const auto c = testing::corpus_with_counts({n});
    const auto ex = split_corpus(c, k);
    REQUIRE(ex.size() == 3);
    const auto& seq = c.users[0].interactions;
    for (int s = 0; s < 3; ++s) {
      const int t = n - 3 + s;
      const int lo = std::max(0, t - static_cast<int>(k));
      CHECK(ex[s].target == seq[t]);
      CHECK(ex[s].target_index == static_cast<std::size_t>(t));
      REQUIRE(ex[s].history.size() == static_cast<std::size_t>(t - lo));
      for (int i = lo; i < t; ++i) CHECK(ex[s].history[i - lo] == seq[i]);
      // Nothing at or after the target leaks into its history.
      for (const auto& h : ex[s].history) CHECK(h.timestamp < ex[s].target.timestamp);
    }
  }
}

TEST_CASE("manifest round-trips against its corpus") {
  testing::TempDir dir;
  const auto c = testing::corpus_with_counts({4, 9, 1, 25});
  const auto ex = split_corpus(c, 5);
  testing::write(dir / "manifest.jsonl", serialize_manifest(ex));
  CHECK(load_manifest(dir / "manifest.jsonl", c) == ex);
}

TEST_CASE("split names parse") {
  CHECK(parse_split("valid") == Split::valid);
  CHECK(to_string(Split::test) == "test");
  CHECK_THROWS(parse_split("dev"));
}
