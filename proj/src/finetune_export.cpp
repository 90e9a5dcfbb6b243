#include "reasonrec/finetune_export.hpp"

#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/rng.hpp"

namespace reasonrec {

std::string format_completion(BinaryLabel label, std::string_view reasoning) {
  return std::string("Prediction: ") + (label.liked() ? "Yes" : "No") + "\n" + std::string(reasoning);
}

json PairReport::to_json() const {
  return {{"built", built}, {"missing_reasoning", missing_reasoning}, {"over_length", over_length}};
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::vector<InstructionPair> build_pairs(const std::vector<SplitExample>& examples, const Corpus& corpus,
                                         const PromptBuilder& builder, const ArtifactStore& descriptions,
                                         const ArtifactStore& profiles, const ArtifactStore& reasoning,
                                         const TemplateId& variant, PairReport* report) {
  PairReport local;
  std::vector<InstructionPair> pairs;
  for (const auto& ex : examples) {
    const std::string id = ex.user_id + ":" + std::string(to_string(ex.split));
    const auto* r = reasoning.find(ArtifactKind::reasoning_gt, example_subject(ex.user_id, ex.split));
    if (!r) {
      local.missing_reasoning.push_back(id);
      continue;
    }
    const auto bundle = prediction_prompt(builder, corpus, descriptions, profiles, ex, variant,
                                          TaskKind::finetuned_predict);
    InstructionPair p;
    p.id = id;
    p.user_id = ex.user_id;
    p.item_id = ex.target.item_id;
    p.prompt = bundle.rendered;
    p.completion = format_completion(ex.target.label, r->text);
    p.label = ex.target.label;
    p.split = ex.split;
    p.template_variant = bundle.tmpl.str();
    if (estimate_tokens(p.prompt) + estimate_tokens(p.completion) > kMaxSeqLen) local.over_length.push_back(id);
    pairs.push_back(std::move(p));
  }
  local.built = pairs.size();
  if (report) *report = std::move(local);
  return pairs;
}

std::vector<InstructionPair> sample_k_shot(const std::vector<InstructionPair>& train, std::size_t k,
                                           std::uint64_t seed, bool stratify) {
  if (k > train.size()) {
    throw Error("K-shot sample of " + std::to_string(k) + " requested but only " + std::to_string(train.size()) +
                " training pairs are available");
  }
  Rng rng(seed);
  std::vector<InstructionPair> out;
  out.reserve(k);
  if (k == 0) return out;
  if (!stratify) {
    for (auto i : sample_indices(train.size(), k, rng)) out.push_back(train[i]);
    return out;
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < train.size(); ++i) (train[i].label.liked() ? pos : neg).push_back(i);
  // Largest remainder over two classes; a tie goes to the positives.
  std::size_t take_pos = k * pos.size() / train.size();
  const std::size_t rem_pos = k * pos.size() % train.size();
  const std::size_t rem_neg = k * neg.size() % train.size();
  if (take_pos + k * neg.size() / train.size() < k && rem_pos >= rem_neg) ++take_pos;
  const std::size_t take_neg = k - take_pos;
  for (auto i : sample_indices(pos.size(), take_pos, rng)) out.push_back(train[pos[i]]);
  for (auto i : sample_indices(neg.size(), take_neg, rng)) out.push_back(train[neg[i]]);
  fisher_yates(out, rng);
  return out;
}

std::string serialize_pairs(const std::vector<InstructionPair>& pairs, const ExportMeta& meta) {
  std::vector<json> lines;
  lines.reserve(pairs.size() + 1);
  lines.push_back({{"kind", "meta"},
                   {"objective", kObjective},
                   {"k_shot", meta.k_shot ? json(*meta.k_shot) : json(nullptr)},
                   {"seed", meta.seed ? json(*meta.seed) : json(nullptr)},
                   {"max_seq_len", kMaxSeqLen}});
  for (const auto& p : pairs) {
    lines.push_back({{"id", p.id},
                     {"user_id", p.user_id},
                     {"item_id", p.item_id},
                     {"split", to_string(p.split)},
                     {"label", p.label.value()},
                     {"prompt", p.prompt},
                     {"completion", p.completion},
                     {"template_variant", p.template_variant},
                     {"max_seq_len", kMaxSeqLen}});
  }
  return to_jsonl(lines);
}

void export_jsonl(const std::vector<InstructionPair>& pairs, const fs::path& path, const ExportMeta& meta) {
  if (pairs.empty()) throw Error("export_jsonl: no pairs to write to " + path.string());
  try {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, serialize_pairs(pairs, meta));
  } catch (const std::exception& e) {
    throw Error("export to " + path.string() + " failed: " + e.what());
  }
}

std::vector<InstructionPair> import_jsonl(const fs::path& path, ExportMeta* meta) {
  std::vector<InstructionPair> pairs;
  bool saw_meta = false;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    try {
      if (j.value("kind", "") == "meta") {
        saw_meta = true;
        if (meta) {
          meta->k_shot = j.at("k_shot").is_null() ? std::nullopt : std::optional(j.at("k_shot").get<std::size_t>());
          meta->seed = j.at("seed").is_null() ? std::nullopt : std::optional(j.at("seed").get<std::uint64_t>());
        }
        return;
      }
      InstructionPair p;
      p.id = j.at("id").get<std::string>();
      p.user_id = j.at("user_id").get<std::string>();
      p.item_id = j.at("item_id").get<std::string>();
      p.split = parse_split(j.at("split").get<std::string>());
      p.label = BinaryLabel(j.at("label").get<int>());
      p.prompt = j.at("prompt").get<std::string>();
      p.completion = j.at("completion").get<std::string>();
      p.template_variant = j.at("template_variant").get<std::string>();
      pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line, e.what());
    }
  });
  if (!saw_meta) throw ParseError(path.string(), 1, "missing meta header");
  return pairs;
}

}  // namespace reasonrec
