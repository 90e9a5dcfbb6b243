#include <catch_amalgamated.hpp>

#include "reasonrec/config.hpp"
#include "reasonrec/error.hpp"
#include "support.hpp"

using namespace reasonrec;

TEST_CASE("defaults") {
  const RunConfig c;
  CHECK(c.threshold == 3);
  CHECK(c.p == 10);
  CHECK(c.n_words == 25);
  CHECK(c.m == 15);
  CHECK(c.q_words == 100);
  CHECK(c.k_shot == 64);
  CHECK(c.backend.kind == BackendKind::mock);
  CHECK(default_k_for(DatasetKind::movies) == 20);
  CHECK(default_k_for(DatasetKind::products) == 5);
  RunConfig movies;
  movies.kind = DatasetKind::movies;
  CHECK(movies.effective_k_core() == 20);
  CHECK(movies.effective_history_k() == 20);
}

TEST_CASE("TOML sections override the defaults") {
  const auto c = parse_config(R"(
[dataset]
kind = "movies"
ratings = "r.dat"
movies = "m.dat"
k_core = 10

[pipeline]
history_k = 8
seed = 7
variant = "v2"

[llm]
backend = "http"
base_url = "http://localhost:8000"
api_key = "secret"
model = "llama"
max_retries = 2

[finetune]
k_shot = 128
stratify_labels = true

[eval]
task = "finetuned"
split = "valid"
similarity = false
)");
  CHECK(c.kind == DatasetKind::movies);
  CHECK(c.ratings == "r.dat");
  CHECK(c.effective_k_core() == 10);
  CHECK(c.effective_history_k() == 8);
  CHECK(c.seed == 7);
  CHECK(c.variant == "v2");
  CHECK(c.backend.kind == BackendKind::http);
  CHECK(c.backend.max_retries == 2);
  CHECK(c.k_shot == 128);
  CHECK(c.stratify_labels);
  CHECK(c.eval_task == TaskKind::finetuned_predict);
  CHECK(c.eval_split == Split::valid);
  CHECK_FALSE(c.similarity);
  const auto j = to_json(c);
  CHECK(j.dump().find("secret") == std::string::npos);
}

TEST_CASE("unknown keys name the field") {
  try {
    parse_config("[pipeline]\nmistyped_key = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "pipeline.mistyped_key");
  }
}

TEST_CASE("validation names the offending field") {
  const auto field_of = [](RunConfig c) {
    try {
      validate(c);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  RunConfig c;
  c.threshold = 6;
  CHECK(field_of(c) == "dataset.threshold");
  c = RunConfig{};
  c.p = 0;
  CHECK(field_of(c) == "pipeline.p");
  c = RunConfig{};
  c.backend.kind = BackendKind::http;
  CHECK(field_of(c) == "llm.base_url");
  c = RunConfig{};
  c.eval_variant = "v9";
  const auto reg = TemplateRegistry::load(std::filesystem::path(REASONREC_SOURCE_DIR) / "templates");
  CHECK_THROWS_AS(validate(c, &reg), ConfigError);
  CHECK_NOTHROW(validate(RunConfig{}, &reg));
}

TEST_CASE("config files load from disk") {
  testing::TempDir dir;
  testing::write(dir / "run.toml", "[dataset]\ncategory = \"fashion\"\n");
  CHECK(load_config(dir / "run.toml").category == "fashion");
  CHECK_THROWS(load_config(dir / "absent.toml"));
}
