#include "reasonrec/generation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/log.hpp"
#include "reasonrec/sampler.hpp"

namespace reasonrec {

std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::description: return "description";
    case ArtifactKind::profile: return "profile";
    case ArtifactKind::reasoning_gt: return "reasoning_gt";
  }
  return "?";
}

ArtifactKind parse_artifact_kind(std::string_view name) {
  for (auto k : {ArtifactKind::description, ArtifactKind::profile, ArtifactKind::reasoning_gt}) {
    if (name == to_string(k)) return k;
  }
  throw Error("unknown artifact kind '" + std::string(name) + "'");
}

json item_subject(const std::string& item_id) { return item_id; }
json user_subject(const std::string& user_id) { return user_id; }
json example_subject(const std::string& user_id, Split split) {
  return json::array({user_id, std::string(to_string(split))});
}

ArtifactStore::ArtifactStore(const ArtifactStore& other) {
  std::lock_guard lock(other.mu_);
  artifacts_ = other.artifacts_;
}

ArtifactStore& ArtifactStore::operator=(const ArtifactStore& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  artifacts_ = other.artifacts_;
  return *this;
}

ArtifactStore::Key ArtifactStore::key_of(ArtifactKind kind, const json& subject, const TemplateId& tmpl) {
  return {kind, subject.dump(), tmpl.str()};
}

void ArtifactStore::put(GenerationArtifact artifact) {
  if (artifact.text.empty()) throw Error("artifact text is empty for " + artifact.subject.dump());
  auto key = key_of(artifact.kind, artifact.subject, artifact.tmpl);
  std::lock_guard lock(mu_);
  artifacts_[std::move(key)] = std::move(artifact);
}

const GenerationArtifact* ArtifactStore::find(ArtifactKind kind, const json& subject) const {
  const auto s = subject.dump();
  std::lock_guard lock(mu_);
  auto it = artifacts_.lower_bound({kind, s, ""});
  if (it == artifacts_.end() || std::get<0>(it->first) != kind || std::get<1>(it->first) != s) return nullptr;
  return &it->second;
}

const GenerationArtifact* ArtifactStore::find(ArtifactKind kind, const json& subject, const TemplateId& tmpl) const {
  std::lock_guard lock(mu_);
  auto it = artifacts_.find(key_of(kind, subject, tmpl));
  return it == artifacts_.end() ? nullptr : &it->second;
}

std::vector<const GenerationArtifact*> ArtifactStore::all(std::optional<ArtifactKind> kind) const {
  std::lock_guard lock(mu_);
  std::vector<const GenerationArtifact*> out;
  for (const auto& [key, a] : artifacts_) {
    if (!kind || a.kind == *kind) out.push_back(&a);
  }
  return out;
}

std::size_t ArtifactStore::size() const {
  std::lock_guard lock(mu_);
  return artifacts_.size();
}

void ArtifactStore::merge(const ArtifactStore& other) {
  if (this == &other) return;
  std::scoped_lock lock(mu_, other.mu_);
  for (const auto& [key, a] : other.artifacts_) artifacts_[key] = a;
}

bool ArtifactStore::operator==(const ArtifactStore& other) const {
  if (this == &other) return true;
  std::scoped_lock lock(mu_, other.mu_);
  return artifacts_ == other.artifacts_;
}

void ArtifactStore::save(const fs::path& dir) const {
  std::lock_guard lock(mu_);
  fs::create_directories(dir);
  std::vector<json> index;
  for (const auto& [key, a] : artifacts_) {
    const fs::path rel = fs::path(std::string(to_string(a.kind))) / (a.cache_key + ".txt");
    fs::create_directories(dir / rel.parent_path());
    write_file_atomic(dir / rel, a.text);
    index.push_back({{"kind", to_string(a.kind)},
                     {"subject", a.subject},
                     {"template", a.tmpl.str()},
                     {"cache_key", a.cache_key},
                     {"path", rel.generic_string()},
                     {"model_id", a.model_id}});
  }
  write_file_atomic(dir / "index.jsonl", to_jsonl(index));
}

ArtifactStore ArtifactStore::load(const fs::path& dir) {
  const auto index = dir / "index.jsonl";
  if (!fs::exists(index)) throw Error("artifact index not found: " + index.string());
  ArtifactStore store;
  for_each_jsonl(index, [&](std::size_t line, const json& r) {
    try {
      GenerationArtifact a;
      a.kind = parse_artifact_kind(r.at("kind").get<std::string>());
      a.subject = r.at("subject");
      a.tmpl = TemplateId::parse(r.at("template").get<std::string>());
      a.cache_key = r.at("cache_key").get<std::string>();
      a.model_id = r.value("model_id", "");
      a.text = read_file(dir / r.at("path").get<std::string>());
      store.put(std::move(a));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(index.string(), line, e.what());
    }
  });
  return store;
}

json GenerationReport::to_json() const {
  json failures = json::array();
  for (const auto& f : failed) failures.push_back({{"subject", f.subject}, {"error", f.error}});
  return {{"requested", requested},
          {"generated", generated},
          {"failed", failures},
          {"no_profile_users", no_profile_users},
          {"warnings", warnings}};
}

void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(work);
  }
  if (first_error) std::rethrow_exception(first_error);
}

ProfileWindow compute_profile_window(const UserRecord& user, std::size_t m, std::size_t k) {
  if (m < 1) throw Error("profile window: m must be >= 1");
  const std::size_t n = user.interactions.size();
  const std::size_t available = n > k ? n - k : 0;
  ProfileWindow w;
  w.m_used = std::min(m, available);
  w.prefix.assign(user.interactions.begin(), user.interactions.begin() + static_cast<std::ptrdiff_t>(w.m_used));
  return w;
}

ItemText item_text(const Corpus& corpus, const ArtifactStore& descriptions, const std::string& item_id) {
  ItemText t;
  if (const auto* item = corpus.find_item(item_id)) t.title = item->title;
  if (const auto* a = descriptions.find(ArtifactKind::description, item_subject(item_id))) t.description = a->text;
  return t;
}

std::vector<HistoryEntry> history_entries(const Corpus& corpus, const ArtifactStore& descriptions,
                                          const std::vector<Interaction>& interactions) {
  std::vector<HistoryEntry> out;
  out.reserve(interactions.size());
  for (const auto& it : interactions) out.push_back({it.label, item_text(corpus, descriptions, it.item_id)});
  return out;
}

std::optional<std::string> stored_profile(const ArtifactStore& profiles, const std::string& user_id) {
  if (const auto* a = profiles.find(ArtifactKind::profile, user_subject(user_id))) return a->text;
  return std::nullopt;
}

PromptBundle prediction_prompt(const PromptBuilder& builder, const Corpus& corpus, const ArtifactStore& descriptions,
                               const ArtifactStore& profiles, const SplitExample& example, const TemplateId& variant,
                               TaskKind task) {
  const auto profile = stored_profile(profiles, example.user_id);
  TemplateId id = variant;
  if (id.family == TemplateFamily::reasoning_rec) id.variant = effective_prediction_variant(id.variant, profile.has_value());
  return builder.prediction(profile, history_entries(corpus, descriptions, example.history),
                            item_text(corpus, descriptions, example.target.item_id), id, task);
}

TemplateId resolve_variant(std::string_view name, DatasetKind kind) {
  if (name.find('/') != std::string_view::npos) return TemplateId::parse(name);
  if (name == "vanilla") return {TemplateFamily::vanilla, kind, "v1"};
  if (name.empty()) throw ConfigError("variant", "empty variant name");
  return {TemplateFamily::reasoning_rec, kind, std::string(name)};
}

GenerationReport run_jobs(const GenerationContext& ctx, const std::vector<GenerationJob>& jobs, ArtifactKind kind,
                          ArtifactStore& out) {
  if (!ctx.gateway) throw Error("generation context has no gateway");
  GenerationReport report;
  report.requested = jobs.size();
  std::mutex report_mu;
  parallel_for(jobs.size(), ctx.parallelism, [&](std::size_t i) {
    const auto& [subject, bundle] = jobs[i];
    try {
      auto resp = ctx.gateway->complete(bundle);
      if (resp.text.empty()) throw Error("empty completion");
      out.put({kind, subject, std::move(resp.text), resp.model_id, bundle.tmpl, bundle.cache_key});
      std::lock_guard lock(report_mu);
      ++report.generated;
    } catch (const Error& e) {
      log::warn("generation failed", {{"kind", to_string(kind)}, {"subject", subject}, {"error", e.what()}});
      std::lock_guard lock(report_mu);
      report.failed.push_back({subject, e.what()});
    }
  });
  std::sort(report.failed.begin(), report.failed.end(),
            [](const auto& a, const auto& b) { return a.subject.dump() < b.subject.dump(); });
  return report;
}

std::vector<GenerationJob> description_jobs(const Corpus& corpus, const PromptBuilder& builder, std::size_t p,
                                            std::size_t n_words, std::uint64_t seed,
                                            std::vector<std::string>* warnings) {
  std::vector<GenerationJob> jobs;
  for (const auto& item : corpus.items) {
    if (item.title.empty()) continue;
    const auto sample = select_reviews(item, p, seed);
    jobs.push_back({item_subject(item.item_id), builder.item_description(item, sample, n_words, warnings)});
  }
  return jobs;
}

std::vector<GenerationJob> profile_jobs(const Corpus& corpus, const PromptBuilder& builder,
                                        const ArtifactStore& descriptions, std::size_t m, std::size_t k,
                                        std::size_t q_words, std::vector<std::string>* no_profile_users) {
  std::vector<GenerationJob> jobs;
  for (const auto& user : corpus.users) {
    const auto window = compute_profile_window(user, m, k);
    if (window.prefix.empty()) {
      if (no_profile_users) no_profile_users->push_back(user.user_id);
      continue;
    }
    jobs.push_back({user_subject(user.user_id),
                    builder.user_profile(history_entries(corpus, descriptions, window.prefix), q_words)});
  }
  return jobs;
}

std::vector<GenerationJob> reasoning_jobs(const Corpus& corpus, const PromptBuilder& builder,
                                          const std::vector<SplitExample>& examples,
                                          const ArtifactStore& descriptions, const ArtifactStore& profiles) {
  std::vector<GenerationJob> jobs;
  for (const auto& ex : examples) {
    jobs.push_back({example_subject(ex.user_id, ex.split),
                    builder.reasoning_gt(stored_profile(profiles, ex.user_id),
                                         history_entries(corpus, descriptions, ex.history),
                                         item_text(corpus, descriptions, ex.target.item_id), ex.target.label)});
  }
  return jobs;
}

namespace {

void check(const GenerationContext& ctx) {
  if (!ctx.corpus || !ctx.builder || !ctx.gateway) throw Error("generation context is incomplete");
}

}  // namespace

GenerationReport generate_descriptions(const GenerationContext& ctx, ArtifactStore& out, std::size_t p,
                                       std::size_t n_words, std::uint64_t seed) {
  check(ctx);
  std::vector<std::string> warnings;
  const auto jobs = description_jobs(*ctx.corpus, *ctx.builder, p, n_words, seed, &warnings);
  auto report = run_jobs(ctx, jobs, ArtifactKind::description, out);
  report.warnings = std::move(warnings);
  return report;
}

GenerationReport generate_profiles(const GenerationContext& ctx, const ArtifactStore& descriptions,
                                   ArtifactStore& out, std::size_t m, std::size_t k, std::size_t q_words) {
  check(ctx);
  std::vector<std::string> no_profile;
  const auto jobs = profile_jobs(*ctx.corpus, *ctx.builder, descriptions, m, k, q_words, &no_profile);
  auto report = run_jobs(ctx, jobs, ArtifactKind::profile, out);
  report.no_profile_users = std::move(no_profile);
  return report;
}

GenerationReport generate_reasoning_gt(const GenerationContext& ctx, const std::vector<SplitExample>& examples,
                                       const ArtifactStore& descriptions, const ArtifactStore& profiles,
                                       ArtifactStore& out) {
  check(ctx);
  return run_jobs(ctx, reasoning_jobs(*ctx.corpus, *ctx.builder, examples, descriptions, profiles),
                  ArtifactKind::reasoning_gt, out);
}

}  // namespace reasonrec
