#include "reasonrec/config.hpp"

#include <CLI11.hpp>
#include <sstream>

#include "reasonrec/error.hpp"
#include "reasonrec/generation.hpp"
#include "reasonrec/jsonl.hpp"

namespace reasonrec {

int default_k_for(DatasetKind kind) { return kind == DatasetKind::movies ? 20 : 5; }

namespace {

std::string single(const CLI::ConfigItem& item) {
  if (item.inputs.size() != 1) throw ConfigError(item.fullname(), "expected a single value");
  return item.inputs.front();
}

long long as_int(const CLI::ConfigItem& item) {
  const auto s = single(item);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(item.fullname(), "expected an integer, got '" + s + "'");
  }
}

std::size_t as_count(const CLI::ConfigItem& item) {
  const auto v = as_int(item);
  if (v < 0) throw ConfigError(item.fullname(), "must be >= 0");
  return static_cast<std::size_t>(v);
}

bool as_bool(const CLI::ConfigItem& item) {
  const auto s = single(item);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError(item.fullname(), "expected true or false, got '" + s + "'");
}

TaskKind parse_eval_task(const std::string& s) {
  if (s == "zero_shot") return TaskKind::zero_shot_predict;
  if (s == "finetuned") return TaskKind::finetuned_predict;
  const auto t = parse_task_kind(s);
  if (t != TaskKind::zero_shot_predict && t != TaskKind::finetuned_predict) {
    throw ConfigError("eval.task", "must be zero_shot or finetuned");
  }
  return t;
}

void apply(RunConfig& c, const CLI::ConfigItem& item) {
  const auto key = item.fullname();
  try {
    if (key == "dataset.kind") c.kind = parse_dataset_kind(single(item));
    else if (key == "dataset.category") c.category = single(item);
    else if (key == "dataset.ratings") c.ratings = single(item);
    else if (key == "dataset.movies") c.movies = single(item);
    else if (key == "dataset.plots") c.plots = single(item);
    else if (key == "dataset.reviews") c.reviews = single(item);
    else if (key == "dataset.metadata") c.metadata = single(item);
    else if (key == "dataset.threshold") c.threshold = static_cast<int>(as_int(item));
    else if (key == "dataset.k_core") c.k_core = static_cast<int>(as_int(item));
    else if (key == "pipeline.history_k") c.history_k = static_cast<int>(as_int(item));
    else if (key == "pipeline.p") c.p = as_count(item);
    else if (key == "pipeline.n_words") c.n_words = as_count(item);
    else if (key == "pipeline.m") c.m = as_count(item);
    else if (key == "pipeline.q_words") c.q_words = as_count(item);
    else if (key == "pipeline.variant") c.variant = single(item);
    else if (key == "pipeline.parallelism") c.parallelism = as_count(item);
    else if (key == "pipeline.seed") c.seed = static_cast<std::uint64_t>(as_count(item));
    else if (key == "pipeline.output_root" || key == "output_root") c.output_root = single(item);
    else if (key == "llm.backend") c.backend.kind = parse_backend_kind(single(item));
    else if (key == "llm.base_url") c.backend.base_url = single(item);
    else if (key == "llm.api_key") c.backend.api_key = single(item);
    else if (key == "llm.model") c.backend.model = single(item);
    else if (key == "llm.max_retries") c.backend.max_retries = static_cast<int>(as_int(item));
    else if (key == "llm.timeout_s") c.backend.timeout = std::chrono::seconds(as_int(item));
    else if (key == "llm.max_in_flight") c.backend.max_in_flight = static_cast<int>(as_int(item));
    else if (key == "llm.embed_model") c.embed_model = single(item);
    else if (key == "finetune.k_shot") c.k_shot = as_count(item);
    else if (key == "finetune.stratify_labels") c.stratify_labels = as_bool(item);
    else if (key == "eval.variant") c.eval_variant = single(item);
    else if (key == "eval.task") c.eval_task = parse_eval_task(single(item));
    else if (key == "eval.split") c.eval_split = parse_split(single(item));
    else if (key == "eval.similarity") c.similarity = as_bool(item);
    else if (key == "eval.finetuned_max_new_tokens") c.finetuned_max_new_tokens = static_cast<int>(as_int(item));
    else throw ConfigError(key, "unknown key");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(source, e.what());
  }
  RunConfig c;
  for (const auto& item : items) {
    // Section open/close markers.
    if (item.name == "++" || item.name == "--") continue;
    apply(c, item);
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config", "file not found: " + path.string());
  return parse_config(read_file(path), path.string());
}

void validate(const RunConfig& c, const TemplateRegistry* registry) {
  if (c.threshold < 1 || c.threshold > 5) throw ConfigError("dataset.threshold", "must be in [1, 5]");
  if (c.effective_k_core() < 1) throw ConfigError("dataset.k_core", "must be >= 1");
  if (c.effective_history_k() < 1) throw ConfigError("pipeline.history_k", "must be >= 1");
  if (c.p < 1) throw ConfigError("pipeline.p", "must be >= 1");
  if (c.n_words < 1) throw ConfigError("pipeline.n_words", "must be >= 1");
  if (c.m < 1) throw ConfigError("pipeline.m", "must be >= 1");
  if (c.q_words < 1) throw ConfigError("pipeline.q_words", "must be >= 1");
  if (c.parallelism < 1) throw ConfigError("pipeline.parallelism", "must be >= 1");
  if (c.category.empty()) throw ConfigError("dataset.category", "must not be empty");
  if (c.k_shot < 1) throw ConfigError("finetune.k_shot", "must be >= 1");
  if (c.finetuned_max_new_tokens < 1) throw ConfigError("eval.finetuned_max_new_tokens", "must be >= 1");
  if (c.backend.max_retries < 0) throw ConfigError("llm.max_retries", "must be >= 0");
  if (c.backend.max_in_flight < 1) throw ConfigError("llm.max_in_flight", "must be >= 1");
  if (c.backend.kind == BackendKind::http && c.backend.base_url.empty()) {
    throw ConfigError("llm.base_url", "required for the http backend (or set LLM_BASE_URL)");
  }
  if (registry) {
    for (const auto& [field, name] : {std::pair{"pipeline.variant", c.variant}, {"eval.variant", c.eval_variant}}) {
      TemplateId id;
      try {
        id = resolve_variant(name, c.kind);
      } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
      }
      if (!registry->contains(id)) throw ConfigError(field, "no template " + id.str());
    }
  }
}

json to_json(const RunConfig& c) {
  return {{"dataset",
           {{"kind", to_string(c.kind)},
            {"category", c.category},
            {"ratings", c.ratings.generic_string()},
            {"movies", c.movies.generic_string()},
            {"plots", c.plots.generic_string()},
            {"reviews", c.reviews.generic_string()},
            {"metadata", c.metadata.generic_string()},
            {"threshold", c.threshold},
            {"k_core", c.effective_k_core()}}},
          {"pipeline",
           {{"history_k", c.effective_history_k()},
            {"p", c.p},
            {"n_words", c.n_words},
            {"m", c.m},
            {"q_words", c.q_words},
            {"variant", c.variant},
            {"parallelism", c.parallelism},
            {"seed", c.seed},
            {"output_root", c.output_root.generic_string()}}},
          {"llm",
           {{"backend", to_string(c.backend.kind)},
            {"base_url", c.backend.base_url},
            {"api_key", c.backend.api_key.empty() ? "" : "<redacted>"},
            {"model", c.backend.model},
            {"max_retries", c.backend.max_retries},
            {"timeout_s", c.backend.timeout.count()},
            {"max_in_flight", c.backend.max_in_flight},
            {"embed_model", c.embed_model}}},
          {"finetune", {{"k_shot", c.k_shot}, {"stratify_labels", c.stratify_labels}}},
          {"eval",
           {{"variant", c.eval_variant},
            {"task", to_string(c.eval_task)},
            {"split", to_string(c.eval_split)},
            {"similarity", c.similarity},
            {"finetuned_max_new_tokens", c.finetuned_max_new_tokens}}}};
}

}  // namespace reasonrec
