#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reasonrec/corpus.hpp"
#include "reasonrec/decoding.hpp"
#include "reasonrec/sampler.hpp"

namespace reasonrec {

enum class TemplateFamily { item_description, user_profile, reasoning_gt, reasoning_rec, vanilla };

std::string_view to_string(TemplateFamily family);
TemplateFamily parse_template_family(std::string_view name);

struct TemplateId {
  TemplateFamily family = TemplateFamily::reasoning_rec;
  DatasetKind dataset_kind = DatasetKind::movies;
  std::string variant = "v1";

  // "family/dataset_kind/variant", the template's path under the registry root.
  std::string str() const;
  static TemplateId parse(std::string_view text);

  auto operator<=>(const TemplateId&) const = default;
};

struct PromptBundle {
  TemplateId tmpl;
  TaskKind task = TaskKind::zero_shot_predict;
  std::string rendered;
  DecodingParams decoding;
  std::string model_id;
  std::string cache_key;
};

// 256-bit digest over the rendered prompt, decoding parameters and model id.
std::string compute_cache_key(std::string_view rendered, const DecodingParams& decoding, std::string_view model_id);

// Fills `{name}` slots and keeps or drops `[[?name ...]]` blocks depending on
// whether slot `name` is non-empty. Substituted values are not rescanned.
// Throws when the template references a slot that was not supplied.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& slots);

// Immutable set of templates loaded from `{root}/{family}/{dataset_kind}/{variant}.txt`.
class TemplateRegistry {
 public:
  static TemplateRegistry load(const std::filesystem::path& root);
  static std::filesystem::path default_root();

  bool contains(const TemplateId& id) const { return templates_.count(id) != 0; }
  const std::string& get(const TemplateId& id) const;
  std::vector<TemplateId> ids() const;

 private:
  std::map<TemplateId, std::string> templates_;
};

struct ItemText {
  std::string title;
  std::string description;
};

struct HistoryEntry {
  BinaryLabel label{0};
  ItemText item;
};

// Lowercase phrase that marks a label-conditioned (reasoning ground truth)
// prompt. Prediction prompts must never contain it.
inline constexpr std::string_view kConditioningPhrase = "we know that the user will";

// Reasoning-rec variant to use when the user has no profile.
std::string effective_prediction_variant(std::string_view variant, bool has_profile);

class PromptBuilder {
 public:
  PromptBuilder(const TemplateRegistry& registry, DatasetKind kind, std::string category, std::string model_id);

  void set_params(TaskKind task, const DecodingParams& params);
  const DecodingParams& params(TaskKind task) const { return params_.at(task); }
  DatasetKind kind() const { return kind_; }
  const std::string& model_id() const { return model_id_; }

  // Movies fill title/year/genre/plot; products fill metadata plus the sampled
  // reviews. Missing metadata fields are appended to `warnings`.
  PromptBundle item_description(const ItemRecord& item, const ReviewSample& sample, std::size_t n_words,
                                std::vector<std::string>* warnings = nullptr) const;

  // Throws ProfileUnavailable for an empty prefix.
  PromptBundle user_profile(const std::vector<HistoryEntry>& prefix, std::size_t q_words) const;

  PromptBundle reasoning_gt(const std::optional<std::string>& profile, const std::vector<HistoryEntry>& history,
                            const ItemText& target, BinaryLabel target_label) const;

  PromptBundle prediction(const std::optional<std::string>& profile, const std::vector<HistoryEntry>& history,
                          const ItemText& target, const TemplateId& variant,
                          TaskKind task = TaskKind::zero_shot_predict) const;

 private:
  PromptBundle finish(const TemplateId& id, TaskKind task, std::string rendered) const;

  const TemplateRegistry* registry_;
  DatasetKind kind_;
  std::string category_;
  std::string model_id_;
  std::map<TaskKind, DecodingParams> params_;
};

class ProfileUnavailable : public std::runtime_error {
 public:
  ProfileUnavailable() : std::runtime_error("profile unavailable: empty history prefix") {}
};

}  // namespace reasonrec
