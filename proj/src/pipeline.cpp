#include "reasonrec/pipeline.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <unistd.h>

#include "reasonrec/error.hpp"
#include "reasonrec/finetune_export.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/log.hpp"

namespace reasonrec {

namespace {

constexpr std::string_view kIngest = "ingest";
constexpr std::string_view kKcore = "kcore";
constexpr std::string_view kSplit = "split";
constexpr std::string_view kDescriptions = "descriptions";
constexpr std::string_view kProfiles = "profiles";
constexpr std::string_view kReasoning = "reasoning";
constexpr std::string_view kExport = "export";
constexpr std::string_view kEval = "eval";
constexpr std::string_view kReport = "report";

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

json ingest_report_json(const IngestReport& r) {
  return {{"records", r.records},
          {"interactions", r.interactions},
          {"skipped_records", r.skipped_records},
          {"duplicates", r.duplicates},
          {"truncated_ratings", r.truncated_ratings},
          {"items_without_metadata", r.items_without_metadata}};
}

json corpus_counts(const Corpus& c) {
  return {{"users", c.users.size()}, {"items", c.items.size()}, {"interactions", c.interaction_count()}};
}

std::vector<PromptBundle> bundles_of(const std::vector<GenerationJob>& jobs) {
  std::vector<PromptBundle> out;
  out.reserve(jobs.size());
  for (const auto& j : jobs) out.push_back(j.bundle);
  return out;
}

}  // namespace

Pipeline::Pipeline(RunConfig config, bool dry_run) : config_(std::move(config)), dry_run_(dry_run) {}

Pipeline::~Pipeline() = default;

fs::path Pipeline::stage_dir(std::string_view stage) const { return config_.output_root / std::string(stage); }

std::size_t Pipeline::backend_calls() const { return gateway_ ? gateway_->backend_calls() : 0; }
std::size_t Pipeline::network_attempts() const { return gateway_ ? gateway_->network_attempts() : 0; }
std::size_t Pipeline::cache_hits() const { return gateway_ ? gateway_->cache_hits() : 0; }

const TemplateRegistry& Pipeline::registry() {
  if (!registry_) registry_ = TemplateRegistry::load(TemplateRegistry::default_root());
  return *registry_;
}

Gateway& Pipeline::gateway() {
  if (!gateway_) gateway_ = std::make_unique<Gateway>(config_.backend, config_.output_root / "cache");
  return *gateway_;
}

PromptBuilder Pipeline::builder() {
  PromptBuilder b(registry(), config_.kind, config_.category, config_.backend.model);
  auto ft = default_params(TaskKind::finetuned_predict);
  ft.max_new_tokens = config_.finetuned_max_new_tokens;
  b.set_params(TaskKind::finetuned_predict, ft);
  return b;
}

void Pipeline::commit(std::string_view stage, const std::function<void(const fs::path&)>& fill,
                      bool keep_existing) const {
  const auto final_dir = stage_dir(stage);
  const auto tmp = config_.output_root / ("." + std::string(stage) + ".tmp." + std::to_string(::getpid()));
  const auto old = config_.output_root / ("." + std::string(stage) + ".old." + std::to_string(::getpid()));
  fs::create_directories(config_.output_root);
  fs::remove_all(tmp);
  try {
    if (keep_existing && fs::is_directory(final_dir)) {
      fs::copy(final_dir, tmp, fs::copy_options::recursive);
    } else {
      fs::create_directories(tmp);
    }
    fill(tmp);
    write_file_atomic(tmp / "config.json", pretty(to_json(config_)));
  } catch (...) {
    fs::remove_all(tmp);
    throw;
  }
  fs::remove_all(old);
  if (fs::exists(final_dir)) fs::rename(final_dir, old);
  fs::rename(tmp, final_dir);
  fs::remove_all(old);
}

json Pipeline::plan(std::string_view stage, json fields) const {
  fields["stage"] = stage;
  fields["dry_run"] = true;
  fields["output"] = stage_dir(stage).generic_string();
  return fields;
}

std::size_t Pipeline::uncached(const std::vector<PromptBundle>& bundles) const {
  const auto cache = config_.output_root / "cache";
  std::size_t n = 0;
  for (const auto& b : bundles) {
    if (!fs::exists(cache / b.cache_key.substr(0, 2) / (b.cache_key + ".json"))) ++n;
  }
  return n;
}

namespace {

void require(const fs::path& path, std::string_view stage) {
  if (!fs::exists(path)) {
    throw MissingStageError(std::string(stage), "missing output of stage '" + std::string(stage) + "' (" +
                                                    path.string() + "); run that stage first");
  }
}

}  // namespace

Corpus Pipeline::load_kcore_corpus() const {
  const auto path = stage_dir(kKcore) / "corpus.jsonl";
  require(path, kKcore);
  return load_corpus(path);
}

std::vector<SplitExample> Pipeline::load_examples(const Corpus& corpus) const {
  const auto path = stage_dir(kSplit) / "manifest.jsonl";
  require(path, kSplit);
  return load_manifest(path, corpus);
}

ArtifactStore Pipeline::load_store(std::string_view stage) const {
  const auto dir = stage_dir(stage) / "store";
  require(dir / "index.jsonl", stage);
  return ArtifactStore::load(dir);
}

json Pipeline::ingest() {
  const auto& c = config_;
  std::vector<fs::path> inputs;
  if (c.kind == DatasetKind::movies) {
    if (c.ratings.empty()) throw ConfigError("dataset.ratings", "required for movies");
    if (c.movies.empty()) throw ConfigError("dataset.movies", "required for movies");
    inputs = {c.ratings, c.movies};
    if (!c.plots.empty()) inputs.push_back(c.plots);
  } else {
    if (c.reviews.empty()) throw ConfigError("dataset.reviews", "required for products");
    if (c.metadata.empty()) throw ConfigError("dataset.metadata", "required for products");
    inputs = {c.reviews, c.metadata};
  }
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw ConfigError("dataset", "input file not found: " + p.string());
  }
  IngestReport report;
  const Corpus corpus =
      c.kind == DatasetKind::movies
          ? parse_movie_dataset(c.ratings, c.movies, c.plots.empty() ? std::nullopt : std::optional(c.plots),
                                c.threshold, &report)
          : parse_product_dataset(c.reviews, c.metadata, c.threshold, &report);
  json summary = {{"stage", kIngest}, {"report", ingest_report_json(report)}, {"corpus", corpus_counts(corpus)}};
  if (dry_run_) return plan(kIngest, summary);
  commit(kIngest, [&](const fs::path& dir) {
    save_corpus(corpus, dir / "corpus.jsonl");
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

json Pipeline::kcore() {
  const auto path = stage_dir(kIngest) / "corpus.jsonl";
  require(path, kIngest);
  const auto before = load_corpus(path);
  const auto after = apply_k_core(before, config_.effective_k_core());
  json summary = {{"stage", kKcore},
                  {"k", config_.effective_k_core()},
                  {"before", corpus_counts(before)},
                  {"after", corpus_counts(after)}};
  if (dry_run_) return plan(kKcore, summary);
  commit(kKcore, [&](const fs::path& dir) {
    save_corpus(after, dir / "corpus.jsonl");
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

json Pipeline::split() {
  const auto corpus = load_kcore_corpus();
  SplitReport report;
  const auto examples = split_corpus(corpus, static_cast<std::size_t>(config_.effective_history_k()), &report);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& e : examples) counts[static_cast<int>(e.split)]++;
  json summary = {{"stage", kSplit},
                  {"history_k", config_.effective_history_k()},
                  {"users_split", report.users_split},
                  {"users_skipped", report.users_skipped},
                  {"train", counts[0]},
                  {"valid", counts[1]},
                  {"test", counts[2]}};
  if (dry_run_) return plan(kSplit, summary);
  commit(kSplit, [&](const fs::path& dir) {
    write_file_atomic(dir / "manifest.jsonl", serialize_manifest(examples));
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

json Pipeline::descriptions() {
  const auto corpus = load_kcore_corpus();
  const auto b = builder();
  std::vector<std::string> warnings;
  const auto jobs = description_jobs(corpus, b, config_.p, config_.n_words, config_.seed, &warnings);
  if (dry_run_) {
    return plan(kDescriptions, {{"items", corpus.items.size()},
                                {"prompts", jobs.size()},
                                {"estimated_backend_calls", uncached(bundles_of(jobs))}});
  }
  ArtifactStore store;
  auto report = run_jobs({&corpus, &b, &gateway(), config_.parallelism}, jobs, ArtifactKind::description, store);
  report.warnings = std::move(warnings);
  json summary = {{"stage", kDescriptions}, {"report", report.to_json()}, {"artifacts", store.size()}};
  commit(kDescriptions, [&](const fs::path& dir) {
    store.save(dir / "store");
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

json Pipeline::profiles() {
  const auto corpus = load_kcore_corpus();
  const auto descs = load_store(kDescriptions);
  const auto b = builder();
  std::vector<std::string> no_profile;
  const auto jobs = profile_jobs(corpus, b, descs, config_.m, static_cast<std::size_t>(config_.effective_history_k()),
                                 config_.q_words, &no_profile);
  if (dry_run_) {
    return plan(kProfiles, {{"users", corpus.users.size()},
                            {"no_profile_users", no_profile.size()},
                            {"prompts", jobs.size()},
                            {"estimated_backend_calls", uncached(bundles_of(jobs))}});
  }
  ArtifactStore store;
  auto report = run_jobs({&corpus, &b, &gateway(), config_.parallelism}, jobs, ArtifactKind::profile, store);
  report.no_profile_users = std::move(no_profile);
  json summary = {{"stage", kProfiles}, {"report", report.to_json()}, {"artifacts", store.size()}};
  commit(kProfiles, [&](const fs::path& dir) {
    store.save(dir / "store");
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

json Pipeline::reasoning() {
  const auto corpus = load_kcore_corpus();
  const auto examples = load_examples(corpus);
  const auto descs = load_store(kDescriptions);
  const auto profs = load_store(kProfiles);
  const auto b = builder();
  const auto jobs = reasoning_jobs(corpus, b, examples, descs, profs);
  if (dry_run_) {
    return plan(kReasoning, {{"examples", examples.size()},
                             {"prompts", jobs.size()},
                             {"estimated_backend_calls", uncached(bundles_of(jobs))}});
  }
  ArtifactStore store;
  const auto report =
      run_jobs({&corpus, &b, &gateway(), config_.parallelism}, jobs, ArtifactKind::reasoning_gt, store);
  json summary = {{"stage", kReasoning}, {"report", report.to_json()}, {"artifacts", store.size()}};
  commit(kReasoning, [&](const fs::path& dir) {
    store.save(dir / "store");
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

json Pipeline::export_pairs() {
  const auto corpus = load_kcore_corpus();
  const auto examples = load_examples(corpus);
  const auto descs = load_store(kDescriptions);
  const auto profs = load_store(kProfiles);
  const auto reasons = load_store(kReasoning);
  const auto b = builder();
  const auto variant = resolve_variant(config_.variant, config_.kind);
  if (!registry().contains(variant)) throw ConfigError("pipeline.variant", "no template " + variant.str());
  PairReport report;
  const auto pairs = build_pairs(examples, corpus, b, descs, profs, reasons, variant, &report);
  std::vector<InstructionPair> by_split[3];
  for (const auto& p : pairs) by_split[static_cast<int>(p.split)].push_back(p);
  const auto shots = sample_k_shot(by_split[0], config_.k_shot, config_.seed, config_.stratify_labels);
  const std::string train_name = "train_k" + std::to_string(config_.k_shot) + ".jsonl";
  json summary = {{"stage", kExport},
                  {"k_shot", config_.k_shot},
                  {"seed", config_.seed},
                  {"stratify_labels", config_.stratify_labels},
                  {"train_pairs", by_split[0].size()},
                  {"valid_pairs", by_split[1].size()},
                  {"test_pairs", by_split[2].size()},
                  {"files", {train_name, "valid.jsonl", "test.jsonl"}},
                  {"report", report.to_json()}};
  if (dry_run_) return plan(kExport, summary);
  commit(kExport, [&](const fs::path& dir) {
    export_jsonl(shots, dir / train_name, {config_.k_shot, config_.seed});
    if (!by_split[1].empty()) export_jsonl(by_split[1], dir / "valid.jsonl", {std::nullopt, config_.seed});
    if (!by_split[2].empty()) export_jsonl(by_split[2], dir / "test.jsonl", {std::nullopt, config_.seed});
    write_file_atomic(dir / "report.json", pretty(summary));
  });
  return summary;
}

std::string Pipeline::eval_slug() const {
  auto v = resolve_variant(config_.eval_variant, config_.kind).str();
  for (auto& ch : v) {
    if (ch == '/') ch = '_';
  }
  return v + "_" + (config_.eval_task == TaskKind::finetuned_predict ? "finetuned" : "zero_shot") + "_" +
         std::string(to_string(config_.eval_split));
}

json Pipeline::eval() {
  const auto corpus = load_kcore_corpus();
  auto examples = load_examples(corpus);
  std::erase_if(examples, [&](const SplitExample& e) { return e.split != config_.eval_split; });
  const auto descs = load_store(kDescriptions);
  const auto profs = load_store(kProfiles);
  std::optional<ArtifactStore> reasons;
  if (fs::exists(stage_dir(kReasoning) / "store" / "index.jsonl")) reasons = load_store(kReasoning);
  const auto b = builder();
  const auto variant = resolve_variant(config_.eval_variant, config_.kind);
  if (!registry().contains(variant)) throw ConfigError("eval.variant", "no template " + variant.str());
  const auto slug = eval_slug();

  if (dry_run_) {
    std::vector<PromptBundle> bundles;
    for (const auto& ex : examples) {
      bundles.push_back(prediction_prompt(b, corpus, descs, profs, ex, variant, config_.eval_task));
    }
    return plan(kEval, {{"variant", variant.str()},
                        {"examples", examples.size()},
                        {"estimated_backend_calls", uncached(bundles)}});
  }

  EvalInputs in{&corpus, &b, &gateway(), &descs, &profs, reasons ? &*reasons : nullptr};
  EvalOptions opt;
  opt.variant = variant;
  opt.task = config_.eval_task;
  opt.parallelism = config_.parallelism;
  opt.state_dir = config_.output_root / ".state" / ("eval_" + slug);
  const auto records = run_eval(examples, in, opt);

  RunInfo info;
  if (config_.eval_task == TaskKind::finetuned_predict) info.k_shot = config_.k_shot;
  info.seed = config_.seed;
  const auto report = aggregate_report(records, std::nullopt, info);
  const json meta = {{"variant", variant.str()},
                     {"task", to_string(config_.eval_task)},
                     {"split", to_string(config_.eval_split)},
                     {"model_id", config_.backend.model},
                     {"backend", to_string(config_.backend.kind)},
                     {"k_shot", info.k_shot ? json(*info.k_shot) : json(nullptr)},
                     {"seed", config_.seed}};
  json summary = {{"stage", kEval}, {"variant", variant.str()}, {"records", records.size()}, {"report", to_json(report)}};
  commit(
      kEval,
      [&](const fs::path& dir) {
        write_file_atomic(dir / ("records_" + slug + ".jsonl"), serialize_eval(meta, records));
        write_file_atomic(dir / ("summary_" + slug + ".json"), pretty(summary));
      },
      /*keep_existing=*/true);
  return summary;
}

json Pipeline::report() {
  const auto dir = stage_dir(kEval);
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("records_", 0) == 0 && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
  }
  if (files.empty()) throw MissingStageError(std::string(kEval), "no evaluation records under " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<EvalRecord> records;
  RunInfo info;
  info.seed = config_.seed;
  for (const auto& f : files) {
    auto ef = load_eval(f);
    if (ef.meta.contains("k_shot") && !ef.meta["k_shot"].is_null() && !info.k_shot) {
      info.k_shot = ef.meta["k_shot"].get<std::size_t>();
    }
    for (auto& r : ef.records) records.push_back(std::move(r));
  }
  if (records.empty()) throw Error("evaluation files hold no records");

  std::optional<std::vector<std::optional<SimilarityScore>>> sims;
  std::size_t with_reference = 0;
  for (const auto& r : records) with_reference += r.reference_reasoning ? 1 : 0;
  if (config_.similarity && with_reference > 0 && !dry_run_) {
    std::unique_ptr<Embedder> embedder;
    if (config_.backend.kind == BackendKind::mock) {
      embedder = std::make_unique<MockEmbedder>();
    } else {
      embedder = std::make_unique<HttpEmbedder>(config_.backend.base_url,
                                                config_.embed_model.empty() ? config_.backend.model : config_.embed_model,
                                                config_.backend.api_key, config_.backend.timeout);
    }
    sims = similarity_scores(records, *embedder);
  }
  if (dry_run_) {
    return plan(kReport, {{"files", files.size()}, {"records", records.size()}, {"with_reference", with_reference}});
  }
  const auto report = aggregate_report(records, sims, info);
  json sources = json::array();
  for (const auto& f : files) sources.push_back(f.filename().string());
  json doc = to_json(report);
  doc["sources"] = sources;
  commit(kReport, [&](const fs::path& out) {
    write_file_atomic(out / "report.json", pretty(doc));
    write_file_atomic(out / "report.csv", to_csv(report));
  });
  return {{"stage", kReport}, {"report", doc}};
}

json Pipeline::run_all() {
  json out = json::array();
  out.push_back(ingest());
  out.push_back(kcore());
  out.push_back(split());
  out.push_back(descriptions());
  out.push_back(profiles());
  out.push_back(reasoning());
  out.push_back(export_pairs());
  out.push_back(eval());
  out.push_back(report());
  return out;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Flags {
  std::string config_path;
  std::string output_root;
  std::string backend;
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  std::string log_level = "warn";
  std::string variant;
  std::optional<std::size_t> k;
  bool stratify = false;
  std::string task;
  std::string split;
  std::string what;
};

void print_error(const json& j) { std::cerr << j.dump() << std::endl; }

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config_path.empty() ? RunConfig{} : load_config(f.config_path);
  c.backend.apply_env();
  if (!f.output_root.empty()) c.output_root = f.output_root;
  if (!f.backend.empty()) c.backend.kind = parse_backend_kind(f.backend);
  if (f.seed) c.seed = *f.seed;
  if (f.k) c.k_shot = *f.k;
  if (f.stratify) c.stratify_labels = true;
  if (!f.variant.empty()) {
    c.variant = f.variant;
    c.eval_variant = f.variant;
  }
  if (!f.task.empty()) {
    if (f.task == "zero_shot") c.eval_task = TaskKind::zero_shot_predict;
    else if (f.task == "finetuned") c.eval_task = TaskKind::finetuned_predict;
    else throw ConfigError("task", "expected zero_shot or finetuned");
  }
  if (!f.split.empty()) {
    try {
      c.eval_split = parse_split(f.split);
    } catch (const Error& e) {
      throw ConfigError("split", e.what());
    }
  }
  return c;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Reasoning-augmented recommendation pipeline", "pipeline"};
  app.fallthrough();
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config_path, "Run configuration file (TOML)");
  app.add_option("--output-root", f.output_root, "Directory holding stage outputs");
  app.add_option("--backend", f.backend, "LLM backend")->check(CLI::IsMember({"http", "mock"}));
  app.add_option("--seed", f.seed, "Seed for sampling");
  app.add_flag("--dry-run", f.dry_run, "Print the plan and write nothing");
  app.add_option("--log-level", f.log_level, "debug, info, warn, error or off");

  auto* ingest = app.add_subcommand("ingest", "Parse the raw dataset into the canonical corpus");
  auto* kcore = app.add_subcommand("kcore", "Keep users with at least k interactions");
  auto* split = app.add_subcommand("split", "Leave-one-out train/valid/test manifest");
  auto* gen = app.add_subcommand("gen", "Generate descriptions, profiles or reasoning");
  gen->add_option("what", f.what, "descriptions | profiles | reasoning")
      ->required()
      ->check(CLI::IsMember({"descriptions", "profiles", "reasoning"}));
  auto* exp = app.add_subcommand("export", "Write K-shot and full instruction-tuning files");
  exp->add_option("--k", f.k, "Number of training pairs");
  exp->add_option("--variant", f.variant, "Prediction template variant");
  exp->add_flag("--stratify-labels", f.stratify, "Keep the label mix of the training split");
  auto* ev = app.add_subcommand("eval", "Run predictions and score them");
  ev->add_option("--variant", f.variant, "v1, v2, v3, no_profile, no_description or vanilla");
  ev->add_option("--task", f.task, "zero_shot or finetuned");
  ev->add_option("--split", f.split, "valid or test");
  ev->add_option("--k", f.k, "K of the fine-tuned model (recorded in the report)");
  auto* rep = app.add_subcommand("report", "Aggregate evaluation records");
  auto* all = app.add_subcommand("run", "Run every stage in order");
  all->add_option("--k", f.k, "Number of training pairs");
  all->add_option("--variant", f.variant, "Prediction template variant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error({{"error", "usage"}, {"message", e.what()}});
    return 2;
  }

  try {
    log::set_level(log::parse_level(f.log_level));
    const RunConfig cfg = resolve(f);
    validate(cfg, nullptr);
    Pipeline p(cfg, f.dry_run);
    json out;
    if (*ingest) out = p.ingest();
    else if (*kcore) out = p.kcore();
    else if (*split) out = p.split();
    else if (*gen) out = f.what == "descriptions" ? p.descriptions() : f.what == "profiles" ? p.profiles() : p.reasoning();
    else if (*exp) out = p.export_pairs();
    else if (*ev) out = p.eval();
    else if (*rep) out = p.report();
    else if (*all) out = p.run_all();
    std::cout << out.dump() << std::endl;
    log::info("done", {{"backend_calls", p.backend_calls()},
                       {"network_attempts", p.network_attempts()},
                       {"cache_hits", p.cache_hits()}});
    return 0;
  } catch (const ConfigError& e) {
    print_error({{"error", "config"}, {"field", e.field()}, {"message", e.what()}});
    return 2;
  } catch (const MissingStageError& e) {
    print_error({{"error", "missing_stage"}, {"stage", e.stage()}, {"message", e.what()}});
    return 3;
  } catch (const std::exception& e) {
    print_error({{"error", "runtime"}, {"message", e.what()}});
    return 1;
  }
}

}  // namespace reasonrec
