#include "reasonrec/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>
#include <unordered_set>

#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/log.hpp"
#include "reasonrec/text.hpp"

namespace reasonrec {

std::string_view to_string(DatasetKind kind) {
  return kind == DatasetKind::movies ? "movies" : "products";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "movies") return DatasetKind::movies;
  if (name == "products") return DatasetKind::products;
  throw ConfigError("dataset.kind", "expected 'movies' or 'products', got '" + std::string(name) + "'");
}

RawRating::RawRating(int value) : value_(value) {
  if (value < 1 || value > 5) throw Error("rating " + std::to_string(value) + " outside [1, 5]");
}

BinaryLabel::BinaryLabel(int value) : value_(value) {
  if (value != 0 && value != 1) throw Error("binary label must be 0 or 1, got " + std::to_string(value));
}

BinaryLabel binarize(RawRating raw, int threshold) {
  if (threshold < 1 || threshold > 5) {
    throw Error("binarization threshold " + std::to_string(threshold) + " outside [1, 5]");
  }
  return BinaryLabel(raw.value() > threshold ? 1 : 0);
}

void Corpus::reindex() {
  item_index_.clear();
  user_index_.clear();
  for (std::size_t i = 0; i < items.size(); ++i) item_index_.emplace(items[i].item_id, i);
  for (std::size_t i = 0; i < users.size(); ++i) user_index_.emplace(users[i].user_id, i);
}

const ItemRecord* Corpus::find_item(std::string_view item_id) const {
  auto it = item_index_.find(std::string(item_id));
  return it == item_index_.end() ? nullptr : &items[it->second];
}

const UserRecord* Corpus::find_user(std::string_view user_id) const {
  auto it = user_index_.find(std::string(user_id));
  return it == user_index_.end() ? nullptr : &users[it->second];
}

std::size_t Corpus::interaction_count() const {
  std::size_t n = 0;
  for (const auto& u : users) n += u.interactions.size();
  return n;
}

namespace {

// Accumulates interactions in input order and finalizes them into a Corpus.
class CorpusBuilder {
 public:
  CorpusBuilder(DatasetKind kind, int threshold) {
    corpus_.kind = kind;
    corpus_.threshold = threshold;
    corpus_.k_core = 1;
  }

  // Returns false for a duplicate (user, item, timestamp).
  bool add(Interaction ia) {
    if (!seen_.emplace(ia.user_id, ia.item_id, ia.timestamp).second) return false;
    if (!item_pos_.count(ia.item_id)) {
      item_pos_.emplace(ia.item_id, corpus_.items.size());
      ItemRecord item;
      item.item_id = ia.item_id;
      item.title = ia.item_id;
      corpus_.items.push_back(std::move(item));
    }
    auto [it, inserted] = user_pos_.emplace(ia.user_id, corpus_.users.size());
    if (inserted) {
      UserRecord u;
      u.user_id = ia.user_id;
      corpus_.users.push_back(std::move(u));
    }
    if (ia.review_text) {
      corpus_.items[item_pos_.at(ia.item_id)].reviews.push_back(
          Review{ia.raw_rating, *ia.review_text, ia.user_id});
    }
    corpus_.users[it->second].interactions.push_back(std::move(ia));
    return true;
  }

  ItemRecord* item(const std::string& id) {
    auto it = item_pos_.find(id);
    return it == item_pos_.end() ? nullptr : &corpus_.items[it->second];
  }

  std::vector<ItemRecord>& items() { return corpus_.items; }

  Corpus finish() {
    for (auto& u : corpus_.users) {
      std::stable_sort(u.interactions.begin(), u.interactions.end(),
                       [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
    }
    corpus_.reindex();
    return std::move(corpus_);
  }

 private:
  Corpus corpus_;
  std::unordered_map<std::string, std::size_t> item_pos_;
  std::unordered_map<std::string, std::size_t> user_pos_;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen_;
};

template <typename T>
bool parse_int(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string json_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    auto s = v.dump();
    return s;
  }
  if (v.is_array()) {
    std::string out;
    for (const auto& e : v) {
      auto part = strip(json_text(e));
      if (part.empty()) continue;
      if (!out.empty()) out.push_back(' ');
      out += part;
    }
    return out;
  }
  return {};
}

// Extracts a trailing "(1999)" from a MovieLens title.
std::string year_from_title(std::string_view title) {
  auto t = strip(title);
  if (t.size() >= 6 && t.back() == ')' && t[t.size() - 6] == '(') {
    auto y = t.substr(t.size() - 5, 4);
    if (std::all_of(y.begin(), y.end(), [](char c) { return c >= '0' && c <= '9'; })) return y;
  }
  return {};
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    fn(lineno, line);
  }
}

}  // namespace

Corpus parse_movie_dataset(const fs::path& ratings_file, const fs::path& movies_file,
                           const std::optional<fs::path>& plots_file, int threshold,
                           IngestReport* report) {
  IngestReport rep;
  CorpusBuilder builder(DatasetKind::movies, threshold);

  for_each_line(ratings_file, [&](std::size_t lineno, const std::string& line) {
    ++rep.records;
    const auto f = split_on(line, "::");
    long long ts = 0;
    int rating = 0;
    if (f.size() != 4 || strip(f[0]).empty() || strip(f[1]).empty() || !parse_int(f[2], rating) ||
        !parse_int(f[3], ts)) {
      throw ParseError(ratings_file.string(), lineno, "expected UserID::MovieID::Rating::Timestamp");
    }
    if (rating < 1 || rating > 5) {
      throw ParseError(ratings_file.string(), lineno, "rating " + std::to_string(rating) + " outside [1, 5]");
    }
    if (ts < 0) throw ParseError(ratings_file.string(), lineno, "negative timestamp");
    Interaction ia{strip(f[0]), strip(f[1]), RawRating(rating), binarize(RawRating(rating), threshold), ts, {}};
    if (!builder.add(std::move(ia))) {
      ++rep.duplicates;
      log::warn("duplicate interaction ignored", {{"file", ratings_file.string()}, {"line", lineno}});
    } else {
      ++rep.interactions;
    }
  });

  for_each_line(movies_file, [&](std::size_t lineno, const std::string& line) {
    const auto f = split_on(line, "::");
    if (f.size() != 3 || strip(f[0]).empty()) {
      throw ParseError(movies_file.string(), lineno, "expected MovieID::Title::Genres");
    }
    ItemRecord* item = builder.item(strip(f[0]));
    if (!item) return;  // never rated
    item->title = ensure_utf8(strip(f[1]));
    auto year = year_from_title(item->title);
    if (!year.empty()) item->metadata["year"] = year;
    std::string genres;
    for (auto g : split_on(f[2], "|")) {
      auto gs = strip(g);
      if (gs.empty()) continue;
      if (!genres.empty()) genres += ", ";
      genres += gs;
    }
    if (!genres.empty()) item->metadata["genre"] = ensure_utf8(genres);
  });

  if (plots_file) {
    for_each_jsonl(*plots_file, [&](std::size_t lineno, const json& r) {
      if (!r.is_object() || !r.contains("item_id") || !r.contains("plot")) {
        throw ParseError(plots_file->string(), lineno, "expected {\"item_id\", \"plot\"}");
      }
      ItemRecord* item = builder.item(json_text(r["item_id"]));
      if (!item) return;
      auto plot = strip(json_text(r["plot"]));
      if (!plot.empty()) item->metadata["plot"] = plot;
    });
  }

  for (const auto& item : builder.items()) {
    if (item.metadata.empty() && item.title == item.item_id) ++rep.items_without_metadata;
  }
  if (report) *report = rep;
  return builder.finish();
}

Corpus parse_product_dataset(const fs::path& reviews_file, const fs::path& metadata_file, int threshold,
                             IngestReport* report) {
  IngestReport rep;
  CorpusBuilder builder(DatasetKind::products, threshold);

  for_each_jsonl(reviews_file, [&](std::size_t lineno, const json& r) {
    ++rep.records;
    if (!r.is_object() || !r.contains("reviewerID") || !r.contains("asin") || !r.contains("overall")) {
      ++rep.skipped_records;
      log::warn("review record missing required field", {{"file", reviews_file.string()}, {"line", lineno}});
      return;
    }
    double overall = 0.0;
    const auto& ov = r["overall"];
    if (ov.is_number()) {
      overall = ov.get<double>();
    } else if (ov.is_string()) {
      try {
        overall = std::stod(ov.get<std::string>());
      } catch (const std::exception&) {
        overall = 0.0;
      }
    }
    const double stars = std::trunc(overall);
    if (stars < 1.0 || stars > 5.0) {
      ++rep.skipped_records;
      log::warn("review rating outside [1, 5]", {{"file", reviews_file.string()}, {"line", lineno}});
      return;
    }
    if (stars != overall) {
      ++rep.truncated_ratings;
      log::info("fractional rating truncated", {{"line", lineno}, {"overall", overall}});
    }
    const auto user = strip(json_text(r["reviewerID"]));
    const auto asin = strip(json_text(r["asin"]));
    if (user.empty() || asin.empty()) {
      ++rep.skipped_records;
      return;
    }
    std::int64_t ts = 0;
    if (r.contains("unixReviewTime") && r["unixReviewTime"].is_number()) {
      ts = r["unixReviewTime"].get<std::int64_t>();
    }
    if (ts < 0) {
      ++rep.skipped_records;
      return;
    }
    std::optional<std::string> text;
    if (r.contains("reviewText")) {
      auto t = strip(json_text(r["reviewText"]));
      if (!t.empty()) text = std::move(t);
    }
    if (!text && r.contains("summary")) {
      auto t = strip(json_text(r["summary"]));
      if (!t.empty()) text = std::move(t);
    }
    const RawRating raw(static_cast<int>(stars));
    Interaction ia{user, asin, raw, binarize(raw, threshold), ts, std::move(text)};
    if (!builder.add(std::move(ia))) {
      ++rep.duplicates;
      log::warn("duplicate interaction ignored", {{"file", reviews_file.string()}, {"line", lineno}});
    } else {
      ++rep.interactions;
    }
  });

  std::unordered_set<std::string> with_meta;
  for_each_jsonl(metadata_file, [&](std::size_t, const json& r) {
    if (!r.is_object() || !r.contains("asin")) return;
    const auto asin = strip(json_text(r["asin"]));
    ItemRecord* item = builder.item(asin);
    if (!item) return;
    with_meta.insert(asin);
    if (r.contains("title")) {
      auto t = strip(json_text(r["title"]));
      if (!t.empty()) item->title = t;
    }
    for (const char* key : {"brand", "price", "description"}) {
      if (!r.contains(key)) continue;
      auto v = strip(json_text(r[key]));
      if (!v.empty()) item->metadata[key] = v;
    }
  });
  for (const auto& item : builder.items()) {
    if (!with_meta.count(item.item_id)) ++rep.items_without_metadata;
  }

  if (report) *report = rep;
  return builder.finish();
}

Corpus apply_k_core(const Corpus& corpus, int k) {
  if (k < 1) throw Error("k-core parameter must be >= 1");
  Corpus out;
  out.kind = corpus.kind;
  out.threshold = corpus.threshold;
  out.k_core = std::max(corpus.k_core, k);

  std::unordered_set<std::string> kept_users;
  std::unordered_set<std::string> live_items;
  for (const auto& u : corpus.users) {
    if (static_cast<int>(u.interactions.size()) < k) continue;
    kept_users.insert(u.user_id);
    for (const auto& ia : u.interactions) live_items.insert(ia.item_id);
    out.users.push_back(u);
  }
  for (const auto& item : corpus.items) {
    if (!live_items.count(item.item_id)) continue;
    ItemRecord copy = item;
    std::erase_if(copy.reviews, [&](const Review& r) { return !kept_users.count(r.user_id); });
    out.items.push_back(std::move(copy));
  }
  out.reindex();
  return out;
}

std::string serialize_corpus(const Corpus& corpus) {
  std::vector<json> records;
  records.push_back({{"kind", "corpus"},
                     {"dataset_kind", to_string(corpus.kind)},
                     {"k_core", corpus.k_core},
                     {"threshold", corpus.threshold}});
  for (const auto& item : corpus.items) {
    json reviews = json::array();
    for (const auto& r : item.reviews) {
      reviews.push_back({{"rating", r.rating.value()}, {"text", r.text}, {"user_id", r.user_id}});
    }
    json rec = {{"kind", "item"},
                {"item_id", item.item_id},
                {"title", item.title},
                {"metadata", item.metadata},
                {"reviews", reviews}};
    if (item.description) rec["description"] = *item.description;
    records.push_back(std::move(rec));
  }
  for (const auto& u : corpus.users) {
    json rec = {{"kind", "user"}, {"user_id", u.user_id}};
    if (u.profile) rec["profile"] = *u.profile;
    records.push_back(std::move(rec));
    for (const auto& ia : u.interactions) {
      json ir = {{"kind", "interaction"},      {"user_id", ia.user_id},  {"item_id", ia.item_id},
                 {"raw_rating", ia.raw_rating.value()}, {"label", ia.label.value()}, {"timestamp", ia.timestamp}};
      if (ia.review_text) ir["review_text"] = *ia.review_text;
      records.push_back(std::move(ir));
    }
  }
  return to_jsonl(records);
}

Corpus deserialize_corpus(std::string_view text, const std::string& source_name) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> user_pos;
  std::size_t lineno = 0;
  std::size_t start = 0;
  bool have_header = false;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (strip(line).empty()) continue;
    try {
      const json r = json::parse(line);
      const auto kind = r.at("kind").get<std::string>();
      if (kind == "corpus") {
        corpus.kind = parse_dataset_kind(r.at("dataset_kind").get<std::string>());
        corpus.k_core = r.at("k_core").get<int>();
        corpus.threshold = r.at("threshold").get<int>();
        have_header = true;
      } else if (kind == "item") {
        ItemRecord item;
        item.item_id = r.at("item_id").get<std::string>();
        item.title = r.at("title").get<std::string>();
        item.metadata = r.at("metadata").get<std::map<std::string, std::string>>();
        for (const auto& rv : r.at("reviews")) {
          item.reviews.push_back(Review{RawRating(rv.at("rating").get<int>()), rv.at("text").get<std::string>(),
                                        rv.at("user_id").get<std::string>()});
        }
        if (r.contains("description")) item.description = r["description"].get<std::string>();
        corpus.items.push_back(std::move(item));
      } else if (kind == "user") {
        UserRecord u;
        u.user_id = r.at("user_id").get<std::string>();
        if (r.contains("profile")) u.profile = r["profile"].get<std::string>();
        user_pos[u.user_id] = corpus.users.size();
        corpus.users.push_back(std::move(u));
      } else if (kind == "interaction") {
        Interaction ia;
        ia.user_id = r.at("user_id").get<std::string>();
        ia.item_id = r.at("item_id").get<std::string>();
        ia.raw_rating = RawRating(r.at("raw_rating").get<int>());
        ia.label = BinaryLabel(r.at("label").get<int>());
        ia.timestamp = r.at("timestamp").get<std::int64_t>();
        if (r.contains("review_text")) ia.review_text = r["review_text"].get<std::string>();
        auto it = user_pos.find(ia.user_id);
        if (it == user_pos.end()) throw Error("interaction before its user record");
        corpus.users[it->second].interactions.push_back(std::move(ia));
      } else {
        throw Error("unknown record kind '" + kind + "'");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(source_name, lineno, e.what());
    }
  }
  if (!have_header && !text.empty()) throw ParseError(source_name, 1, "missing corpus header record");
  corpus.reindex();
  return corpus;
}

void save_corpus(const Corpus& corpus, const fs::path& path) { write_file_atomic(path, serialize_corpus(corpus)); }

Corpus load_corpus(const fs::path& path) { return deserialize_corpus(read_file(path), path.string()); }

}  // namespace reasonrec
