#include <catch_amalgamated.hpp>

#include "reasonrec/error.hpp"
#include "reasonrec/finetune_export.hpp"
#include "reasonrec/pipeline.hpp"
#include "support.hpp"
#include "world.hpp"

using namespace reasonrec;
namespace fs = std::filesystem;

namespace {

RunConfig synthetic_config(const fs::path& root) {
  RunConfig c;
  c.kind = DatasetKind::products;
  c.reviews = testing::source_path("data/synthetic/reviews.jsonl");
  c.metadata = testing::source_path("data/synthetic/meta.jsonl");
  c.output_root = root;
  c.k_shot = 32;
  return c;
}

// Relative path -> contents for every file under root, skipping the response
// cache and resume state.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel.rfind("cache", 0) == 0 || rel.rfind(".state", 0) == 0) continue;
    out[rel] = read_file(e.path());
  }
  return out;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pipeline");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("full offline run and warm rerun") {
  testing::TempDir root;
  const auto cfg = synthetic_config(root.path());
  Pipeline first(cfg);
  const auto summary = first.run_all();
  CHECK(first.network_attempts() == 0);
  CHECK(first.backend_calls() > 0);
  for (const char* stage : {"ingest", "kcore", "split", "descriptions", "profiles", "reasoning", "export", "eval", "report"}) {
    CHECK(fs::exists(root / stage / "config.json"));
  }
  ExportMeta meta;
  const auto pairs = import_jsonl(root / "export" / "train_k32.jsonl", &meta);
  CHECK(pairs.size() == 32);
  CHECK(meta.k_shot == std::optional<std::size_t>(32));
  const auto report = nlohmann::json::parse(read_file(root / "report" / "report.json"));
  CHECK(report.at("auc").is_number());
  CHECK(fs::exists(root / "report" / "report.csv"));

  const auto before = snapshot(root.path());
  Pipeline second(cfg);
  second.run_all();
  CHECK(second.backend_calls() == 0);
  CHECK(snapshot(root.path()) == before);
}

TEST_CASE("a missing upstream stage is reported") {
  testing::TempDir root;
  Pipeline p(synthetic_config(root.path()));
  CHECK_THROWS_AS(p.split(), MissingStageError);
  CHECK_THROWS_AS(p.eval(), MissingStageError);
}

TEST_CASE("dry run writes nothing") {
  testing::TempDir root;
  const auto out = root / "out";
  Pipeline p(synthetic_config(out), true);
  const auto plan = p.ingest();
  CHECK(plan.is_object());
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("K larger than the training split fails loudly") {
  testing::TempDir root;
  auto cfg = synthetic_config(root.path());
  cfg.k_shot = 64;
  Pipeline p(cfg);
  p.ingest();
  p.kcore();
  p.split();
  p.descriptions();
  p.profiles();
  p.reasoning();
  try {
    p.export_pairs();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("64") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(root / "export"));
}

TEST_CASE("cli exit codes") {
  testing::TempDir root;
  const auto out = (root / "o").string();
  const auto toml = root / "run.toml";
  testing::write(toml, "[dataset]\nkind = \"products\"\nreviews = \"" + testing::source_path("data/synthetic/reviews.jsonl").string() +
                           "\"\nmetadata = \"" + testing::source_path("data/synthetic/meta.jsonl").string() + "\"\n");
  CHECK(cli({"--config", toml.string(), "--output-root", out, "--log-level", "off", "frobnicate"}) == 2);
  CHECK(cli({"--config", toml.string(), "--output-root", out, "--log-level", "off", "split"}) == 3);
  testing::write(root / "bad.toml", "[pipeline]\nnope = 1\n");
  CHECK(cli({"--config", (root / "bad.toml").string(), "--output-root", out, "--log-level", "off", "ingest"}) == 2);
  CHECK(cli({"--config", toml.string(), "--output-root", out, "--log-level", "off", "--dry-run", "ingest"}) == 0);
  CHECK_FALSE(fs::exists(out));
  CHECK(cli({"--config", toml.string(), "--output-root", out, "--log-level", "off", "ingest"}) == 0);
  CHECK(fs::exists(fs::path(out) / "ingest" / "corpus.jsonl"));
}
