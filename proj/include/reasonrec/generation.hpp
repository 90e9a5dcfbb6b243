#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "reasonrec/corpus.hpp"
#include "reasonrec/gateway.hpp"
#include "reasonrec/prompting.hpp"
#include "reasonrec/splitter.hpp"

namespace reasonrec {

enum class ArtifactKind { description, profile, reasoning_gt };

std::string_view to_string(ArtifactKind kind);
ArtifactKind parse_artifact_kind(std::string_view name);

// Subject keys: item_id for descriptions, user_id for profiles,
// [user_id, split] for reasoning.
nlohmann::json item_subject(const std::string& item_id);
nlohmann::json user_subject(const std::string& user_id);
nlohmann::json example_subject(const std::string& user_id, Split split);

struct GenerationArtifact {
  ArtifactKind kind = ArtifactKind::description;
  nlohmann::json subject;
  std::string text;
  std::string model_id;
  TemplateId tmpl;
  std::string cache_key;

  bool operator==(const GenerationArtifact&) const = default;
};

// One artifact per (kind, subject, template). Safe for concurrent put().
class ArtifactStore {
 public:
  ArtifactStore() = default;
  ArtifactStore(const ArtifactStore& other);
  ArtifactStore& operator=(const ArtifactStore& other);

  // Replaces an existing artifact with the same key.
  void put(GenerationArtifact artifact);

  // First artifact for (kind, subject) in template order, if any.
  const GenerationArtifact* find(ArtifactKind kind, const nlohmann::json& subject) const;
  const GenerationArtifact* find(ArtifactKind kind, const nlohmann::json& subject, const TemplateId& tmpl) const;

  std::vector<const GenerationArtifact*> all(std::optional<ArtifactKind> kind = std::nullopt) const;
  std::size_t size() const;

  // Adds every artifact of `other`, replacing on key collisions.
  void merge(const ArtifactStore& other);

  // `{dir}/index.jsonl` plus `{dir}/{kind}/{cache_key}.txt`; the index is
  // sorted, so equal stores give identical files.
  void save(const std::filesystem::path& dir) const;
  static ArtifactStore load(const std::filesystem::path& dir);

  bool operator==(const ArtifactStore& other) const;

 private:
  using Key = std::tuple<ArtifactKind, std::string, std::string>;
  static Key key_of(ArtifactKind kind, const nlohmann::json& subject, const TemplateId& tmpl);

  mutable std::mutex mu_;
  std::map<Key, GenerationArtifact> artifacts_;
};

struct GenerationFailure {
  nlohmann::json subject;
  std::string error;
};

struct GenerationReport {
  std::size_t requested = 0;
  std::size_t generated = 0;
  std::vector<GenerationFailure> failed;
  std::vector<std::string> no_profile_users;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// Runs fn(0..n-1) on up to `parallelism` threads. The first exception thrown
// by any task is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn);

struct ProfileWindow {
  std::vector<Interaction> prefix;  // earliest first
  std::size_t m_used = 0;
};

// First min(m, max(0, n - k)) interactions of the user's sequence.
ProfileWindow compute_profile_window(const UserRecord& user, std::size_t m, std::size_t k);

// Everything a stage needs to turn corpus records into prompts and call the
// model.
struct GenerationContext {
  const Corpus* corpus = nullptr;
  const PromptBuilder* builder = nullptr;
  Gateway* gateway = nullptr;
  std::size_t parallelism = 4;
};

struct GenerationJob {
  nlohmann::json subject;
  PromptBundle bundle;
};

// Prompt planning, separate from execution so a dry run can count requests.
// Items without reviews or plot still get a description from metadata alone.
std::vector<GenerationJob> description_jobs(const Corpus& corpus, const PromptBuilder& builder, std::size_t p,
                                            std::size_t n_words, std::uint64_t seed,
                                            std::vector<std::string>* warnings = nullptr);

// Profiles come from the global sequence: one per user, window relative to
// the end of the full sequence. Users with an empty window are appended to
// `no_profile_users` and get no job.
std::vector<GenerationJob> profile_jobs(const Corpus& corpus, const PromptBuilder& builder,
                                        const ArtifactStore& descriptions, std::size_t m, std::size_t k,
                                        std::size_t q_words, std::vector<std::string>* no_profile_users = nullptr);

std::vector<GenerationJob> reasoning_jobs(const Corpus& corpus, const PromptBuilder& builder,
                                          const std::vector<SplitExample>& examples,
                                          const ArtifactStore& descriptions, const ArtifactStore& profiles);

// Issues every job through the gateway; failures are reported, not thrown.
GenerationReport run_jobs(const GenerationContext& ctx, const std::vector<GenerationJob>& jobs, ArtifactKind kind,
                          ArtifactStore& out);

GenerationReport generate_descriptions(const GenerationContext& ctx, ArtifactStore& out, std::size_t p,
                                       std::size_t n_words, std::uint64_t seed);

GenerationReport generate_profiles(const GenerationContext& ctx, const ArtifactStore& descriptions,
                                   ArtifactStore& out, std::size_t m, std::size_t k, std::size_t q_words);

GenerationReport generate_reasoning_gt(const GenerationContext& ctx, const std::vector<SplitExample>& examples,
                                       const ArtifactStore& descriptions, const ArtifactStore& profiles,
                                       ArtifactStore& out);

// Title plus generated description (empty when none was generated).
ItemText item_text(const Corpus& corpus, const ArtifactStore& descriptions, const std::string& item_id);

std::vector<HistoryEntry> history_entries(const Corpus& corpus, const ArtifactStore& descriptions,
                                          const std::vector<Interaction>& interactions);

std::optional<std::string> stored_profile(const ArtifactStore& profiles, const std::string& user_id);

// The prediction prompt for one example, switching to the no-profile
// variant when the user has no profile.
PromptBundle prediction_prompt(const PromptBuilder& builder, const Corpus& corpus, const ArtifactStore& descriptions,
                               const ArtifactStore& profiles, const SplitExample& example, const TemplateId& variant,
                               TaskKind task = TaskKind::zero_shot_predict);

// Resolves "vanilla", a reasoning-rec variant name ("v1", "no_profile", ...)
// or a full "family/kind/variant" id.
TemplateId resolve_variant(std::string_view name, DatasetKind kind);

}  // namespace reasonrec
