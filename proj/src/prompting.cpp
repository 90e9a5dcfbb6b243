#include "reasonrec/prompting.hpp"

#include <fstream>

#include "reasonrec/digest.hpp"
#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/text.hpp"

namespace reasonrec {

std::string_view to_string(TemplateFamily family) {
  switch (family) {
    case TemplateFamily::item_description: return "item_description";
    case TemplateFamily::user_profile: return "user_profile";
    case TemplateFamily::reasoning_gt: return "reasoning_gt";
    case TemplateFamily::reasoning_rec: return "reasoning_rec";
    case TemplateFamily::vanilla: return "vanilla";
  }
  return "?";
}

TemplateFamily parse_template_family(std::string_view name) {
  for (auto f : {TemplateFamily::item_description, TemplateFamily::user_profile, TemplateFamily::reasoning_gt,
                 TemplateFamily::reasoning_rec, TemplateFamily::vanilla}) {
    if (name == to_string(f)) return f;
  }
  throw Error("unknown template family '" + std::string(name) + "'");
}

std::string TemplateId::str() const {
  return std::string(to_string(family)) + "/" + std::string(to_string(dataset_kind)) + "/" + variant;
}

TemplateId TemplateId::parse(std::string_view text) {
  const auto parts = split_on(text, "/");
  if (parts.size() != 3 || parts[2].empty()) throw Error("template id must be family/dataset_kind/variant");
  return TemplateId{parse_template_family(parts[0]), parse_dataset_kind(parts[1]), std::string(parts[2])};
}

std::string compute_cache_key(std::string_view rendered, const DecodingParams& d, std::string_view model_id) {
  const json key = {{"model", model_id},
                    {"prompt", rendered},
                    {"temperature", d.temperature},
                    {"top_p", d.top_p},
                    {"max_new_tokens", d.max_new_tokens},
                    {"want_logprobs", d.want_logprobs}};
  return sha256_hex(key.dump());
}

namespace {

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

bool slot_filled(const std::map<std::string, std::string>& slots, const std::string& name) {
  auto it = slots.find(name);
  return it != slots.end() && !it->second.empty();
}

// Replaces `{ident}` occurrences. Braces not wrapping an identifier are
// literal text.
std::string fill_slots(std::string_view t, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(t.size() * 2);
  std::size_t i = 0;
  while (i < t.size()) {
    if (t[i] == '{') {
      std::size_t j = i + 1;
      while (j < t.size() && is_ident_char(t[j])) ++j;
      if (j > i + 1 && j < t.size() && t[j] == '}') {
        const std::string name(t.substr(i + 1, j - i - 1));
        auto it = slots.find(name);
        if (it == slots.end()) throw Error("template slot {" + name + "} has no value");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(t[i]);
    ++i;
  }
  return out;
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  // Optional blocks first, then slot substitution over the surviving text.
  std::string kept;
  kept.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find("[[?", i);
    if (open == std::string_view::npos) {
      kept.append(tmpl.substr(i));
      break;
    }
    kept.append(tmpl.substr(i, open - i));
    std::size_t j = open + 3;
    while (j < tmpl.size() && is_ident_char(tmpl[j])) ++j;
    const std::string name(tmpl.substr(open + 3, j - open - 3));
    if (name.empty()) throw Error("optional block without a slot name");
    const auto close = tmpl.find("]]", j);
    if (close == std::string_view::npos) throw Error("unterminated optional block [[?" + name);
    std::size_t body = j;
    if (body < close && tmpl[body] == ' ') ++body;
    if (slot_filled(slots, name)) kept.append(tmpl.substr(body, close - body));
    i = close + 2;
  }
  return fill_slots(kept, slots);
}

TemplateRegistry TemplateRegistry::load(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error("template directory not found: " + root.string());
  TemplateRegistry reg;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    const auto rel = fs::relative(entry.path(), root);
    std::vector<std::string> parts;
    for (const auto& p : rel) parts.push_back(p.string());
    if (parts.size() != 3) continue;
    TemplateId id;
    try {
      id = TemplateId{parse_template_family(parts[0]), parse_dataset_kind(parts[1]), entry.path().stem().string()};
    } catch (const std::exception&) {
      continue;
    }
    auto text = read_file(entry.path());
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.pop_back();
    reg.templates_.emplace(std::move(id), std::move(text));
  }
  if (reg.templates_.empty()) throw Error("no templates under " + root.string());
  return reg;
}

fs::path TemplateRegistry::default_root() {
  if (const char* env = std::getenv("REASONREC_TEMPLATES")) return env;
  if (fs::is_directory("templates")) return "templates";
  return REASONREC_TEMPLATE_DIR;
}

const std::string& TemplateRegistry::get(const TemplateId& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error("no template " + id.str());
  return it->second;
}

std::vector<TemplateId> TemplateRegistry::ids() const {
  std::vector<TemplateId> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

std::string effective_prediction_variant(std::string_view variant, bool has_profile) {
  if (!has_profile && variant != "no_description") return "no_profile";
  return std::string(variant);
}

namespace {

std::string label_word(BinaryLabel l) { return l.liked() ? "Liked" : "Disliked"; }

std::string entry_full(const HistoryEntry& e) {
  const auto& [title, desc] = e.item;
  if (title.empty()) return label_word(e.label) + " " + desc;
  if (desc.empty()) return label_word(e.label) + " " + title;
  return label_word(e.label) + " " + title + ". Description: " + desc;
}

std::string entry_title(const HistoryEntry& e) {
  return label_word(e.label) + " " + (e.item.title.empty() ? e.item.description : e.item.title);
}

std::string target_full(const ItemText& t) {
  if (t.title.empty()) return t.description;
  if (t.description.empty()) return t.title;
  return t.title + ". Description: " + t.description;
}

std::string join_history(const std::vector<HistoryEntry>& history, bool titles_only) {
  std::string out;
  for (const auto& e : history) {
    if (!out.empty()) out.push_back('\n');
    out += titles_only ? entry_title(e) : entry_full(e);
  }
  return out;
}

}  // namespace

PromptBuilder::PromptBuilder(const TemplateRegistry& registry, DatasetKind kind, std::string category,
                             std::string model_id)
    : registry_(&registry), kind_(kind), category_(std::move(category)), model_id_(std::move(model_id)) {
  for (auto t : {TaskKind::item_description, TaskKind::user_profile, TaskKind::reasoning_gt,
                 TaskKind::zero_shot_predict, TaskKind::finetuned_predict}) {
    params_[t] = default_params(t);
  }
}

void PromptBuilder::set_params(TaskKind task, const DecodingParams& params) {
  validate(params);
  params_[task] = params;
}

PromptBundle PromptBuilder::finish(const TemplateId& id, TaskKind task, std::string rendered) const {
  PromptBundle b;
  b.tmpl = id;
  b.task = task;
  b.rendered = std::move(rendered);
  b.decoding = params_.at(task);
  b.model_id = model_id_;
  b.cache_key = compute_cache_key(b.rendered, b.decoding, b.model_id);
  return b;
}

PromptBundle PromptBuilder::item_description(const ItemRecord& item, const ReviewSample& sample,
                                             std::size_t n_words, std::vector<std::string>* warnings) const {
  if (n_words < 1) throw Error("item_description: n_words must be >= 1");
  const TemplateId id{TemplateFamily::item_description, kind_, "v1"};
  std::map<std::string, std::string> slots{{"title", item.title},
                                           {"n_words", std::to_string(n_words)},
                                           {"category", category_}};
  const auto meta = [&](const char* key) {
    auto it = item.metadata.find(key);
    return it == item.metadata.end() ? std::string() : it->second;
  };
  std::vector<const char*> wanted;
  if (kind_ == DatasetKind::movies) {
    wanted = {"year", "genre", "plot"};
  } else {
    wanted = {"brand", "price", "description"};
    std::string reviews;
    for (std::size_t i = 0; i < sample.selected.size(); ++i) {
      if (!reviews.empty()) reviews.push_back('\n');
      reviews += std::to_string(i + 1) + ". (" + std::to_string(sample.selected[i].rating.value()) + " stars) " +
                 sample.selected[i].text;
    }
    slots["reviews"] = reviews;
    if (reviews.empty() && warnings) warnings->push_back(item.item_id + ": no reviews");
  }
  for (const char* key : wanted) {
    slots[key] = meta(key);
    if (slots[key].empty() && warnings) warnings->push_back(item.item_id + ": missing " + key);
  }
  if (item.title == item.item_id && warnings) warnings->push_back(item.item_id + ": title falls back to id");
  return finish(id, TaskKind::item_description, render_template(registry_->get(id), slots));
}

PromptBundle PromptBuilder::user_profile(const std::vector<HistoryEntry>& prefix, std::size_t q_words) const {
  if (prefix.empty()) throw ProfileUnavailable();
  const TemplateId id{TemplateFamily::user_profile, kind_, "v1"};
  const std::map<std::string, std::string> slots{
      {"history", join_history(prefix, false)}, {"q_words", std::to_string(q_words)}, {"category", category_}};
  return finish(id, TaskKind::user_profile, render_template(registry_->get(id), slots));
}

PromptBundle PromptBuilder::reasoning_gt(const std::optional<std::string>& profile,
                                         const std::vector<HistoryEntry>& history, const ItemText& target,
                                         BinaryLabel target_label) const {
  const TemplateId id{TemplateFamily::reasoning_gt, kind_, "v1"};
  const std::map<std::string, std::string> slots{{"profile", profile.value_or("")},
                                                 {"history", join_history(history, false)},
                                                 {"target", target_full(target)},
                                                 {"target_title", target.title.empty() ? target.description : target.title},
                                                 {"label_word", target_label.liked() ? "like" : "dislike"},
                                                 {"category", category_}};
  return finish(id, TaskKind::reasoning_gt, render_template(registry_->get(id), slots));
}

PromptBundle PromptBuilder::prediction(const std::optional<std::string>& profile,
                                       const std::vector<HistoryEntry>& history, const ItemText& target,
                                       const TemplateId& variant, TaskKind task) const {
  if (variant.family != TemplateFamily::reasoning_rec && variant.family != TemplateFamily::vanilla) {
    throw Error("prediction needs a reasoning_rec or vanilla template, got " + variant.str());
  }
  if (task != TaskKind::zero_shot_predict && task != TaskKind::finetuned_predict) {
    throw Error("prediction task must be zero_shot_predict or finetuned_predict");
  }
  const bool titles_only = variant.family == TemplateFamily::vanilla || variant.variant == "no_description";
  const bool drop_profile = variant.family == TemplateFamily::vanilla || variant.variant == "no_profile";
  const std::string title = target.title.empty() ? target.description : target.title;
  const std::map<std::string, std::string> slots{{"profile", drop_profile ? "" : profile.value_or("")},
                                                 {"history", join_history(history, titles_only)},
                                                 {"target", titles_only ? title : target_full(target)},
                                                 {"target_title", title},
                                                 {"category", category_}};
  return finish(variant, task, render_template(registry_->get(variant), slots));
}

}  // namespace reasonrec
