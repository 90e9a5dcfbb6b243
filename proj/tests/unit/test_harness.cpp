#include <catch_amalgamated.hpp>

#include <httplib.h>

#include <cmath>
#include <thread>

#include "reasonrec/error.hpp"
#include "reasonrec/harness.hpp"
#include "reasonrec/metrics.hpp"
#include "support.hpp"
#include "world.hpp"

using namespace reasonrec;

namespace {

LlmResponse with_logprobs(std::vector<std::vector<TokenLogprob>> lp) {
  LlmResponse r;
  r.text = "Prediction: Yes";
  r.first_token_logprobs = std::move(lp);
  return r;
}

std::vector<SplitExample> only(const std::vector<SplitExample>& all, Split s) {
  std::vector<SplitExample> out;
  for (const auto& e : all) {
    if (e.split == s) out.push_back(e);
  }
  return out;
}

}  // namespace

TEST_CASE("parser reads the anchored prediction") {
  const auto a = parse_prediction("Prediction: Yes\nThe user has shown a liking for serums.");
  CHECK(a.status == ParseStatus::ok);
  CHECK(a.label == BinaryLabel(1));
  CHECK(a.remainder == "The user has shown a liking for serums.");

  const auto b = parse_prediction("prediction: no \xE2\x80\x94 because it is greasy");
  CHECK(b.status == ParseStatus::ok);
  CHECK(b.label == BinaryLabel(0));
  CHECK(b.remainder == "\xE2\x80\x94 because it is greasy");

  const auto c = parse_prediction("I cannot determine.");
  CHECK(c.status == ParseStatus::failed);
  CHECK_FALSE(c.label);
  CHECK(c.remainder == "I cannot determine.");
}

TEST_CASE("parser tolerates markdown and separators") {
  CHECK(parse_prediction("**Prediction:** Yes").label == BinaryLabel(1));
  CHECK(parse_prediction("**Prediction**: NO. It is bad").label == BinaryLabel(0));
  CHECK(parse_prediction("Prediction = yes").label == BinaryLabel(1));
  CHECK(parse_prediction("Prediction - No").label == BinaryLabel(0));
  // "Yesterday" is not a yes.
  CHECK(parse_prediction("Prediction: Yesterday").status != ParseStatus::ok);
}

TEST_CASE("parser falls back to a leading yes or no") {
  const auto f = parse_prediction("Yes, the user will enjoy it.");
  CHECK(f.status == ParseStatus::fallback);
  CHECK(f.label == BinaryLabel(1));
  CHECK(parse_prediction("I think no.").label == BinaryLabel(0));
  CHECK(parse_prediction("one two three four five six seven eight nine ten yes").status == ParseStatus::failed);
}

TEST_CASE("parser round-trips every formatted completion") {
  for (int l : {0, 1}) {
    for (const char* tail : {"", "x", "Prediction: No", "  spaced  ", "multi\nline"}) {
      const std::string text = std::string("Prediction: ") + (l ? "Yes" : "No") + "\n" + tail;
      const auto p = parse_prediction(text);
      CHECK(p.status == ParseStatus::ok);
      CHECK(p.label == BinaryLabel(l));
    }
  }
}

TEST_CASE("scores from logprobs") {
  const double lp = std::log(0.3);
  auto eq = score_from_logprobs(with_logprobs({{{"Prediction", 0}}, {{" Yes", lp}, {" No", lp}}}), BinaryLabel(1));
  CHECK(eq.from_logprobs);
  CHECK(*eq.score == Catch::Approx(0.5).margin(1e-12));

  auto s = score_from_logprobs(with_logprobs({{{" Yes", std::log(0.9)}, {" No", std::log(0.1)}}}), BinaryLabel(1));
  CHECK(*s.score == Catch::Approx(0.9).margin(1e-12));

  // Case and tokenizer markers are folded together.
  auto folded = score_from_logprobs(
      with_logprobs({{{"\xC4\xA0Yes", std::log(0.2)}, {"yes", std::log(0.2)}, {"\xE2\x96\x81No", std::log(0.1)}}}),
      BinaryLabel(1));
  CHECK(*folded.score == Catch::Approx(0.8).margin(1e-12));

  LlmResponse none;
  none.text = "Prediction: Yes";
  auto fb = score_from_logprobs(none, BinaryLabel(1));
  CHECK_FALSE(fb.from_logprobs);
  CHECK(*fb.score == 1.0);
  CHECK(*score_from_logprobs(none, BinaryLabel(0)).score == 0.0);
  CHECK_FALSE(score_from_logprobs(none, std::nullopt).score);
}

TEST_CASE("single-token logprobs still give a score") {
  auto y = score_from_logprobs(with_logprobs({{{" Yes", std::log(0.7)}, {" Maybe", std::log(0.2)}}}), BinaryLabel(1));
  CHECK(*y.score == Catch::Approx(0.7).margin(1e-12));
  auto n = score_from_logprobs(with_logprobs({{{" No", std::log(0.6)}}}), BinaryLabel(0));
  CHECK(*n.score == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("zero-shot evaluation over the synthetic corpus") {
  testing::World w;
  const auto test = only(w.examples, Split::test);
  EvalInputs in{&w.corpus, &w.builder, &w.gateway, &w.descriptions, &w.profiles, &w.reasoning};
  EvalOptions opt;
  opt.variant = TemplateId{TemplateFamily::reasoning_rec, DatasetKind::products, "v1"};
  const auto recs = run_eval(test, in, opt);
  REQUIRE(recs.size() == test.size());
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& r : recs) {
    CHECK(r.split == Split::test);
    CHECK(r.parse_status == ParseStatus::ok);
    CHECK(r.score_from_logprobs);
    CHECK(r.reference_reasoning.has_value());
    scores.push_back(*r.score);
    labels.push_back(r.gold.value());
  }
  CHECK(std::is_sorted(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.user_id < b.user_id; }));
  const auto auc = binary_auc(scores, labels);
  CHECK(auc.auc >= 0.0);
  CHECK(auc.auc <= 1.0);

  // Same inputs, same records.
  CHECK(run_eval(test, in, opt) == recs);

  testing::TempDir dir;
  MockEmbedder emb;
  const auto sims = similarity_scores(recs, emb);
  testing::write(dir / "eval.jsonl", serialize_eval({{"variant", opt.variant.str()}}, recs, sims));
  const auto back = load_eval(dir / "eval.jsonl");
  CHECK(back.records == recs);
  CHECK(back.meta.at("variant") == opt.variant.str());
  REQUIRE(back.similarity.size() == recs.size());
  CHECK(back.similarity[0] == sims[0]);
}

TEST_CASE("interrupted evaluation resumes after the last full chunk") {
  testing::World w;
  const auto test = only(w.examples, Split::test);
  REQUIRE(test.size() > 20);
  testing::TempDir state;

  const std::string ok_body =
      R"({"choices":[{"message":{"content":"Prediction: Yes\nok"}, "logprobs":{"content":[{"token":"Prediction","logprob":0,"top_logprobs":[]},{"token":" Yes","logprob":-0.5,"top_logprobs":[{"token":" Yes","logprob":-0.5},{"token":" No","logprob":-1.0}]}]}}]})";
  std::atomic<int> hits{0};
  httplib::Server srv;
  std::atomic<bool> healthy{false};
  srv.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const int h = ++hits;
    if (!healthy && h > 10) {
      res.status = 503;
      return;
    }
    res.set_content(ok_body, "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  BackendConfig cfg;
  cfg.kind = BackendKind::http;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.max_retries = 0;
  Gateway flaky(cfg);
  EvalInputs in{&w.corpus, &w.builder, &flaky, &w.descriptions, &w.profiles, nullptr};
  EvalOptions opt;
  opt.variant = TemplateId{TemplateFamily::reasoning_rec, DatasetKind::products, "v1"};
  opt.parallelism = 1;
  opt.chunk_size = 4;
  opt.state_dir = state.path();
  CHECK_THROWS_AS(run_eval(test, in, opt), TransportError);
  const auto st = nlohmann::json::parse(reasonrec::read_file(state / "run_state.json"));
  CHECK(st.at("cursor") == 8);

  healthy = true;
  hits = 0;
  Gateway good(cfg);
  in.gateway = &good;
  const auto recs = run_eval(test, in, opt);
  CHECK(recs.size() == test.size());
  CHECK(static_cast<std::size_t>(hits.load()) == test.size() - 8);
  srv.stop();
  th.join();
}
