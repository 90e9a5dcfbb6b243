#include "reasonrec/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>

#include "reasonrec/digest.hpp"
#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/log.hpp"
#include "reasonrec/text.hpp"

namespace reasonrec {

namespace {

std::string lstrip(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return std::string(s.substr(i));
}

std::string_view strip_punct(std::string_view w) {
  while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.front()))) w.remove_prefix(1);
  while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.back()))) w.remove_suffix(1);
  return w;
}

}  // namespace

ParsedPrediction parse_prediction(std::string_view text) {
  static const std::regex anchor(R"(prediction\**\s*[:=\-]?\s*\**\s*(yes|no)\b)", std::regex::icase);
  ParsedPrediction out;
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, anchor)) {
    out.label = BinaryLabel(to_lower(m[1].str()) == "yes" ? 1 : 0);
    out.remainder = lstrip(text.substr(static_cast<std::size_t>(m.position(0) + m.length(0))));
    out.status = ParseStatus::ok;
    return out;
  }
  const auto words = split_words(text);
  for (std::size_t i = 0; i < words.size() && i < kFallbackWindow; ++i) {
    const auto w = to_lower(strip_punct(words[i]));
    if (w == "yes" || w == "no") {
      out.label = BinaryLabel(w == "yes" ? 1 : 0);
      const auto end = static_cast<std::size_t>(words[i].data() - text.data()) + words[i].size();
      out.remainder = lstrip(text.substr(end));
      out.status = ParseStatus::fallback;
      return out;
    }
  }
  out.remainder = std::string(text);
  out.status = ParseStatus::failed;
  return out;
}

namespace {

// "yes" / "no" for Yes/No token variants (case, leading space, byte-level
// BPE "Ġ" and sentencepiece "▁" markers), otherwise empty.
std::string yes_no_token(std::string_view tok) {
  for (bool changed = true; changed;) {
    changed = false;
    for (std::string_view marker : {" ", "\xC4\xA0", "\xE2\x96\x81"}) {
      if (tok.substr(0, marker.size()) == marker) {
        tok.remove_prefix(marker.size());
        changed = true;
      }
    }
  }
  while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.remove_suffix(1);
  const auto w = to_lower(tok);
  return w == "yes" || w == "no" ? w : std::string();
}

double logsumexp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

}  // namespace

ScoreResult score_from_logprobs(const LlmResponse& response, std::optional<BinaryLabel> predicted) {
  if (response.first_token_logprobs) {
    for (const auto& position : *response.first_token_logprobs) {
      std::vector<double> yes, no;
      for (const auto& alt : position) {
        const auto w = yes_no_token(alt.token);
        if (w == "yes") yes.push_back(alt.logprob);
        if (w == "no") no.push_back(alt.logprob);
      }
      if (yes.empty() && no.empty()) continue;
      double score;
      if (!yes.empty() && !no.empty()) {
        const double ly = logsumexp(yes), ln = logsumexp(no);
        score = 1.0 / (1.0 + std::exp(ln - ly));
      } else if (!yes.empty()) {
        score = std::exp(logsumexp(yes));
      } else {
        score = 1.0 - std::exp(logsumexp(no));
      }
      return {std::clamp(score, 0.0, 1.0), true};
    }
    log::warn("no Yes/No alternatives in logprobs; using label fallback");
  }
  if (!predicted) return {std::nullopt, false};
  return {predicted->liked() ? 1.0 : 0.0, false};
}

json to_json(const EvalRecord& r, const std::optional<SimilarityScore>& similarity) {
  json j = {{"kind", "eval"},
            {"user_id", r.user_id},
            {"item_id", r.item_id},
            {"split", to_string(r.split)},
            {"gold", r.gold.value()},
            {"predicted", r.predicted ? json(r.predicted->value()) : json(nullptr)},
            {"score", r.score ? json(*r.score) : json(nullptr)},
            {"score_from_logprobs", r.score_from_logprobs},
            {"reasoning_text", r.reasoning_text},
            {"reference_reasoning", r.reference_reasoning ? json(*r.reference_reasoning) : json(nullptr)},
            {"parse_status", to_string(r.parse_status)},
            {"variant", r.variant}};
  if (similarity) {
    j["similarity"] = {{"precision", similarity->precision}, {"recall", similarity->recall}, {"f1", similarity->f1}};
  }
  return j;
}

EvalRecord eval_record_from_json(const json& j) {
  EvalRecord r;
  r.user_id = j.at("user_id").get<std::string>();
  r.item_id = j.at("item_id").get<std::string>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.gold = BinaryLabel(j.at("gold").get<int>());
  if (!j.at("predicted").is_null()) r.predicted = BinaryLabel(j.at("predicted").get<int>());
  if (!j.at("score").is_null()) r.score = j.at("score").get<double>();
  r.score_from_logprobs = j.at("score_from_logprobs").get<bool>();
  r.reasoning_text = j.at("reasoning_text").get<std::string>();
  if (!j.at("reference_reasoning").is_null()) r.reference_reasoning = j.at("reference_reasoning").get<std::string>();
  r.parse_status = parse_parse_status(j.at("parse_status").get<std::string>());
  r.variant = j.at("variant").get<std::string>();
  return r;
}

std::string serialize_eval(const json& meta, const std::vector<EvalRecord>& records,
                           const std::vector<std::optional<SimilarityScore>>& similarity) {
  if (!similarity.empty() && similarity.size() != records.size()) throw Error("similarity list length mismatch");
  std::vector<json> lines;
  lines.reserve(records.size() + 1);
  json header = meta;
  header["kind"] = "meta";
  lines.push_back(std::move(header));
  for (std::size_t i = 0; i < records.size(); ++i) {
    lines.push_back(to_json(records[i], similarity.empty() ? std::nullopt : similarity[i]));
  }
  return to_jsonl(lines);
}

EvalFile load_eval(const fs::path& path) {
  EvalFile f;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    try {
      if (j.value("kind", "") == "meta") {
        f.meta = j;
        return;
      }
      f.records.push_back(eval_record_from_json(j));
      std::optional<SimilarityScore> s;
      if (j.contains("similarity")) {
        const auto& js = j["similarity"];
        s = SimilarityScore{js.at("precision").get<double>(), js.at("recall").get<double>(), js.at("f1").get<double>()};
      }
      f.similarity.push_back(s);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line, e.what());
    } catch (const Error& e) {
      throw ParseError(path.string(), line, e.what());
    }
  });
  return f;
}

namespace {

EvalRecord evaluate_one(const SplitExample& ex, const PromptBundle& bundle, const EvalInputs& in) {
  const auto resp = in.gateway->complete(bundle);
  auto parsed = parse_prediction(resp.text);
  EvalRecord r;
  r.user_id = ex.user_id;
  r.item_id = ex.target.item_id;
  r.split = ex.split;
  r.gold = ex.target.label;
  r.parse_status = parsed.status;
  r.predicted = parsed.label;
  r.reasoning_text = std::move(parsed.remainder);
  if (r.predicted) {
    const auto s = score_from_logprobs(resp, r.predicted);
    r.score = s.score;
    r.score_from_logprobs = s.from_logprobs;
  }
  if (in.reasoning) {
    if (const auto* a = in.reasoning->find(ArtifactKind::reasoning_gt, example_subject(ex.user_id, ex.split))) {
      r.reference_reasoning = a->text;
    }
  }
  r.variant = bundle.tmpl.str();
  return r;
}

void append_lines(const fs::path& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("cannot open " + path.string());
  out << to_jsonl(lines);
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

std::vector<EvalRecord> run_eval(const std::vector<SplitExample>& examples, const EvalInputs& in,
                                 const EvalOptions& opt) {
  if (!in.corpus || !in.builder || !in.gateway || !in.descriptions || !in.profiles) {
    throw Error("run_eval: incomplete inputs");
  }
  std::vector<PromptBundle> bundles;
  bundles.reserve(examples.size());
  std::string fingerprint;
  for (const auto& ex : examples) {
    bundles.push_back(prediction_prompt(*in.builder, *in.corpus, *in.descriptions, *in.profiles, ex, opt.variant,
                                        opt.task));
    fingerprint += bundles.back().cache_key;
  }
  fingerprint = sha256_hex(fingerprint);

  std::vector<std::optional<EvalRecord>> records(examples.size());
  std::size_t cursor = 0;
  fs::path partial, state;
  if (opt.state_dir) {
    fs::create_directories(*opt.state_dir);
    partial = *opt.state_dir / "records.partial.jsonl";
    state = *opt.state_dir / "run_state.json";
    bool resumed = false;
    if (fs::exists(state) && fs::exists(partial)) {
      const auto s = json::parse(read_file(state), nullptr, false);
      if (!s.is_discarded() && s.value("fingerprint", "") == fingerprint) {
        const auto lines = read_jsonl(partial);
        cursor = std::min<std::size_t>(s.value("cursor", 0), lines.size());
        for (std::size_t i = 0; i < cursor; ++i) records[i] = eval_record_from_json(lines[i]);
        log::info("resuming evaluation", {{"cursor", cursor}, {"total", examples.size()}});
        resumed = true;
      }
    }
    if (!resumed) {
      write_file_atomic(partial, "");
      cursor = 0;
    }
    // Drop any lines past the cursor left by an interrupted chunk.
    std::vector<json> kept;
    for (std::size_t i = 0; i < cursor; ++i) kept.push_back(to_json(*records[i]));
    write_file_atomic(partial, to_jsonl(kept));
  }

  const std::size_t chunk = std::max<std::size_t>(1, opt.chunk_size);
  while (cursor < examples.size()) {
    const std::size_t end = std::min(examples.size(), cursor + chunk);
    parallel_for(end - cursor, opt.parallelism, [&](std::size_t j) {
      const std::size_t i = cursor + j;
      records[i] = evaluate_one(examples[i], bundles[i], in);
    });
    if (opt.state_dir) {
      std::vector<json> lines;
      for (std::size_t i = cursor; i < end; ++i) lines.push_back(to_json(*records[i]));
      append_lines(partial, lines);
      write_file_atomic(state, json({{"cursor", end}, {"total", examples.size()}, {"variant", opt.variant.str()},
                                     {"task", to_string(opt.task)}, {"fingerprint", fingerprint}})
                                   .dump());
    }
    cursor = end;
  }

  std::vector<EvalRecord> out;
  out.reserve(records.size());
  for (auto& r : records) out.push_back(std::move(*r));
  std::stable_sort(out.begin(), out.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.split < b.split;
  });
  return out;
}

std::vector<std::optional<SimilarityScore>> similarity_scores(const std::vector<EvalRecord>& records,
                                                              Embedder& embedder) {
  std::vector<std::optional<SimilarityScore>> out(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.reference_reasoning || strip(r.reasoning_text).empty() || strip(*r.reference_reasoning).empty()) continue;
    const auto cand = embedder.embed_tokens(r.reasoning_text);
    const auto ref = embedder.embed_tokens(*r.reference_reasoning);
    if (cand.vectors.empty() || ref.vectors.empty()) continue;
    out[i] = greedy_match_score(cand, ref);
  }
  return out;
}

}  // namespace reasonrec
