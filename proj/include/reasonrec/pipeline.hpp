#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reasonrec/config.hpp"
#include "reasonrec/generation.hpp"
#include "reasonrec/harness.hpp"

namespace reasonrec {

// Stage runner over `{output_root}/{stage}/`. Each stage reads its upstream
// outputs, writes into a temporary directory and renames it into place, and
// leaves a `config.json` echo of the resolved configuration. In dry-run mode
// a stage returns its plan and writes nothing.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config, bool dry_run = false);
  ~Pipeline();

  nlohmann::json ingest();
  nlohmann::json kcore();
  nlohmann::json split();
  nlohmann::json descriptions();
  nlohmann::json profiles();
  nlohmann::json reasoning();
  nlohmann::json export_pairs();
  nlohmann::json eval();
  nlohmann::json report();

  // Every stage in order; stops at the first failure.
  nlohmann::json run_all();

  const RunConfig& config() const { return config_; }
  std::filesystem::path stage_dir(std::string_view stage) const;
  std::string eval_slug() const;

  std::size_t backend_calls() const;
  std::size_t network_attempts() const;
  std::size_t cache_hits() const;

 private:
  const TemplateRegistry& registry();
  Gateway& gateway();
  PromptBuilder builder();

  Corpus load_kcore_corpus() const;
  std::vector<SplitExample> load_examples(const Corpus& corpus) const;
  ArtifactStore load_store(std::string_view stage) const;
  std::size_t uncached(const std::vector<PromptBundle>& bundles) const;
  nlohmann::json plan(std::string_view stage, nlohmann::json fields) const;

  // Fills a fresh temporary directory, then swaps it in for the stage.
  // With keep_existing the previous contents are carried over first.
  void commit(std::string_view stage, const std::function<void(const std::filesystem::path&)>& fill,
              bool keep_existing = false) const;

  RunConfig config_;
  bool dry_run_;
  std::optional<TemplateRegistry> registry_;
  std::unique_ptr<Gateway> gateway_;
};

// Entry point of the `pipeline` executable. Exit codes: 0 success, 1 runtime
// failure, 2 configuration error, 3 missing upstream stage. Errors are one
// JSON line on stderr.
int run_cli(int argc, char** argv);

}  // namespace reasonrec
