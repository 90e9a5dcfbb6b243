#include "reasonrec/splitter.hpp"

#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/log.hpp"

namespace reasonrec {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw Error("unknown split '" + std::string(name) + "'");
}

std::vector<SplitExample> split_corpus(const Corpus& corpus, std::size_t history_k, SplitReport* report) {
  SplitReport rep;
  std::vector<SplitExample> out;
  for (const auto& user : corpus.users) {
    const auto& seq = user.interactions;
    const std::size_t n = seq.size();
    if (n < 3) {
      ++rep.users_skipped;
      log::warn("user has fewer than 3 interactions; not split", {{"user_id", user.user_id}, {"n", n}});
      continue;
    }
    ++rep.users_split;
    for (auto split : {Split::train, Split::valid, Split::test}) {
      const std::size_t t = n - 3 + static_cast<std::size_t>(split);
      const std::size_t begin = t > history_k ? t - history_k : 0;
      SplitExample ex;
      ex.user_id = user.user_id;
      ex.target = seq[t];
      ex.history.assign(seq.begin() + static_cast<std::ptrdiff_t>(begin), seq.begin() + static_cast<std::ptrdiff_t>(t));
      ex.split = split;
      ex.target_index = t;
      out.push_back(std::move(ex));
    }
  }
  if (report) *report = rep;
  return out;
}

std::string serialize_manifest(const std::vector<SplitExample>& examples) {
  std::vector<json> records;
  records.reserve(examples.size());
  for (const auto& ex : examples) {
    json items = json::array(), labels = json::array();
    for (const auto& h : ex.history) {
      items.push_back(h.item_id);
      labels.push_back(h.label.value());
    }
    records.push_back({{"user_id", ex.user_id},
                       {"split", to_string(ex.split)},
                       {"target_item", ex.target.item_id},
                       {"target_label", ex.target.label.value()},
                       {"history_items", items},
                       {"history_labels", labels},
                       {"target_index", ex.target_index}});
  }
  return to_jsonl(records);
}

std::vector<SplitExample> load_manifest(const fs::path& path, const Corpus& corpus) {
  std::vector<SplitExample> out;
  for_each_jsonl(path, [&](std::size_t lineno, const json& r) {
    try {
      SplitExample ex;
      ex.user_id = r.at("user_id").get<std::string>();
      ex.split = parse_split(r.at("split").get<std::string>());
      ex.target_index = r.at("target_index").get<std::size_t>();
      const UserRecord* user = corpus.find_user(ex.user_id);
      if (!user) throw Error("user '" + ex.user_id + "' not in corpus");
      if (ex.target_index >= user->interactions.size()) throw Error("target_index out of range");
      ex.target = user->interactions[ex.target_index];
      if (ex.target.item_id != r.at("target_item").get<std::string>()) {
        throw Error("target_item does not match corpus sequence");
      }
      const auto items = r.at("history_items").get<std::vector<std::string>>();
      if (items.size() > ex.target_index) throw Error("history longer than prefix");
      const std::size_t begin = ex.target_index - items.size();
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& ia = user->interactions[begin + i];
        if (ia.item_id != items[i]) throw Error("history does not match corpus sequence");
        ex.history.push_back(ia);
      }
      out.push_back(std::move(ex));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  });
  return out;
}

}  // namespace reasonrec
