#include <catch_amalgamated.hpp>

#include "reasonrec/corpus.hpp"
#include "reasonrec/error.hpp"
#include "reasonrec/synthetic.hpp"
#include "support.hpp"

using namespace reasonrec;

TEST_CASE("binarize uses a strict threshold") {
  CHECK(binarize(RawRating(4), 3).value() == 1);
  CHECK(binarize(RawRating(3), 3).value() == 0);
  CHECK(binarize(RawRating(1), 3).value() == 0);
  CHECK(binarize(RawRating(5), 3).value() == 1);
  CHECK(binarize(RawRating(5), 5).value() == 0);
  CHECK_THROWS_AS(binarize(RawRating(3), 0), Error);
  CHECK_THROWS_AS(binarize(RawRating(3), 6), Error);
  CHECK_THROWS_AS(RawRating(0), Error);
  CHECK_THROWS_AS(BinaryLabel(2), Error);
}

TEST_CASE("binarize agrees with the threshold comparison for every rating and threshold") {
  for (int t = 1; t <= 5; ++t) {
    for (int r = 1; r <= 5; ++r) CHECK(binarize(RawRating(r), t).value() == (r > t ? 1 : 0));
  }
}

TEST_CASE("movie dataset parses double-colon files") {
  testing::TempDir dir;
  testing::write(dir / "ratings.dat", "1::1193::5::978300760\n1::661::3::978302109\n2::1193::4::978298413\n"
                                      "1::661::3::978302109\n");
  testing::write(dir / "movies.dat", "1193::One Flew Over the Cuckoo's Nest (1975)::Drama\n"
                                     "661::James and the Giant Peach (1996)::Animation|Children's|Musical\n"
                                     "5::Never Rated (1990)::Comedy\n");
  testing::write(dir / "plots.jsonl", "{\"item_id\":\"661\",\"plot\":\"A boy and a peach.\"}\n");
  IngestReport rep;
  const auto c = parse_movie_dataset(dir / "ratings.dat", dir / "movies.dat", dir / "plots.jsonl", 3, &rep);
  CHECK(c.kind == DatasetKind::movies);
  CHECK(rep.duplicates == 1);
  CHECK(rep.interactions == 3);
  REQUIRE(c.users.size() == 2);
  REQUIRE(c.items.size() == 2);
  const auto* u1 = c.find_user("1");
  REQUIRE(u1);
  REQUIRE(u1->interactions.size() == 2);
  CHECK(u1->interactions[0].item_id == "1193");
  CHECK(u1->interactions[0].label.value() == 1);
  CHECK(u1->interactions[1].label.value() == 0);
  const auto* peach = c.find_item("661");
  REQUIRE(peach);
  CHECK(peach->title == "James and the Giant Peach (1996)");
  CHECK(peach->metadata.at("year") == "1996");
  CHECK(peach->metadata.at("genre") == "Animation, Children's, Musical");
  CHECK(peach->metadata.at("plot") == "A boy and a peach.");
  CHECK(c.find_item("5") == nullptr);
}

TEST_CASE("malformed ratings line names file and line") {
  testing::TempDir dir;
  testing::write(dir / "ratings.dat", "1::1193::5::978300760\n1::1193::5\n");
  testing::write(dir / "movies.dat", "1193::X (1975)::Drama\n");
  try {
    parse_movie_dataset(dir / "ratings.dat", dir / "movies.dat", std::nullopt);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("ratings.dat") != std::string::npos);
  }
}

TEST_CASE("Latin-1 movie titles become UTF-8") {
  testing::TempDir dir;
  testing::write(dir / "ratings.dat", "1::7::4::10\n");
  testing::write(dir / "movies.dat", "7::Am\xE9lie (2001)::Comedy|Romance\n");
  const auto c = parse_movie_dataset(dir / "ratings.dat", dir / "movies.dat", std::nullopt);
  CHECK(c.items.at(0).title == "Am\xC3\xA9lie (2001)");
}

TEST_CASE("product dataset parses review and metadata lines") {
  testing::TempDir dir;
  testing::write(dir / "reviews.jsonl",
                 R"({"reviewerID":"A","asin":"P1","overall":5.0,"unixReviewTime":20,"reviewText":"Great."})" "\n"
                 R"({"reviewerID":"A","asin":"P2","overall":2.5,"unixReviewTime":10,"summary":"Meh"})" "\n"
                 R"({"asin":"P1","overall":3.0})" "\n"
                 R"({"reviewerID":"B","asin":"P3","overall":4,"unixReviewTime":5})" "\n");
  testing::write(dir / "meta.jsonl",
                 R"({"asin":"P1","title":"Serum","brand":"Lumen","price":12.5,"description":["a","b"]})" "\n"
                 R"({"asin":"P2","title":"Toner"})" "\n");
  IngestReport rep;
  const auto c = parse_product_dataset(dir / "reviews.jsonl", dir / "meta.jsonl", 3, &rep);
  CHECK(rep.skipped_records == 1);
  CHECK(rep.truncated_ratings == 1);
  CHECK(rep.items_without_metadata == 1);
  const auto* a = c.find_user("A");
  REQUIRE(a);
  REQUIRE(a->interactions.size() == 2);
  CHECK(a->interactions[0].item_id == "P2");  // earlier timestamp first
  CHECK(a->interactions[0].raw_rating.value() == 2);
  CHECK(a->interactions[0].review_text == std::optional<std::string>("Meh"));
  const auto* p1 = c.find_item("P1");
  REQUIRE(p1);
  CHECK(p1->metadata.at("brand") == "Lumen");
  CHECK_FALSE(p1->metadata.at("description").empty());
  REQUIRE(p1->reviews.size() == 1);
  CHECK(p1->reviews[0].text == "Great.");
  const auto* p3 = c.find_item("P3");
  REQUIRE(p3);
  CHECK(p3->title == "P3");
}

TEST_CASE("k-core keeps users with at least k interactions") {
  // 10 users with 1..10 interactions; k=5 keeps the 6 users with 5..10.
  std::vector<int> counts;
  for (int i = 1; i <= 10; ++i) counts.push_back(i);
  const auto c = testing::corpus_with_counts(counts);
  const auto f = apply_k_core(c, 5);
  CHECK(f.users.size() == 6);
  CHECK(f.k_core == 5);
  for (const auto& u : f.users) CHECK(u.interactions.size() >= 5);
  // Items i0..i9 are all still used by the 10-interaction user.
  CHECK(f.items.size() == 10);
}

TEST_CASE("k-core is a single pass over users and drops orphaned items") {
  auto c = testing::corpus_with_counts({2, 6});
  const auto f = apply_k_core(c, 3);
  REQUIRE(f.users.size() == 1);
  CHECK(f.users[0].user_id == "u1");
  CHECK(apply_k_core(c, 7).users.empty());
  CHECK(apply_k_core(c, 7).items.empty());
  CHECK(apply_k_core(c, 1) == [&] { auto x = c; x.k_core = 1; return x; }());
}

TEST_CASE("k-core property: survivors are exactly the users at or above k") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> counts(1 + gen() % 20);
    for (auto& n : counts) n = static_cast<int>(gen() % 25);
    const auto c = testing::corpus_with_counts(counts);
    const int k = 1 + static_cast<int>(gen() % 10);
    const auto f = apply_k_core(c, k);
    std::size_t expected = 0;
    for (int n : counts) expected += n >= k ? 1 : 0;
    CHECK(f.users.size() == expected);
    std::set<std::string> used;
    for (const auto& u : f.users) {
      for (const auto& it : u.interactions) used.insert(it.item_id);
    }
    CHECK(f.items.size() == used.size());
  }
}

TEST_CASE("canonical corpus round-trips") {
  testing::TempDir dir;
  auto c = testing::corpus_with_counts({3, 4});
  c.users[0].profile = "likes serums";
  c.users[1].interactions[0].review_text = "Cr\xC3\xA8me \"quoted\"\nnewline";
  c.items[0].reviews.push_back(Review{RawRating(4), "nice", "u0"});
  c.items[1].description = "desc";
  c.items[1].metadata["brand"] = "B";
  save_corpus(c, dir / "c.jsonl");
  const auto back = load_corpus(dir / "c.jsonl");
  CHECK(back == c);
  CHECK(serialize_corpus(back) == serialize_corpus(c));
}

TEST_CASE("bundled synthetic corpus regenerates byte for byte") {
  const std::filesystem::path dir = std::filesystem::path(REASONREC_SOURCE_DIR) / "data" / "synthetic";
  const auto files = make_synthetic(SyntheticSpec{});
  CHECK(files.reviews == read_file(dir / "reviews.jsonl"));
  CHECK(files.metadata == read_file(dir / "meta.jsonl"));
  const auto c = apply_k_core(parse_product_dataset(dir / "reviews.jsonl", dir / "meta.jsonl"), 5);
  CHECK(c.users.size() == 50);
  CHECK(c.items.size() == 120);
}
