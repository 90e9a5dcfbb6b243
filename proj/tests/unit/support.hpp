#pragma once

#include <filesystem>
#include <random>
#include <set>
#include <string>

#include "reasonrec/corpus.hpp"
#include "reasonrec/jsonl.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rr") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline void write(const std::filesystem::path& p, const std::string& content) {
  reasonrec::write_file_atomic(p, content);
}

inline reasonrec::Interaction interaction(const std::string& user, const std::string& item, int rating,
                                          std::int64_t ts, int threshold = 3) {
  reasonrec::Interaction it;
  it.user_id = user;
  it.item_id = item;
  it.raw_rating = reasonrec::RawRating(rating);
  it.label = reasonrec::binarize(it.raw_rating, threshold);
  it.timestamp = ts;
  return it;
}

// Users u0..u{n-1}; user i has counts[i] interactions on items "i{j}".
inline reasonrec::Corpus corpus_with_counts(const std::vector<int>& counts,
                                            reasonrec::DatasetKind kind = reasonrec::DatasetKind::products) {
  reasonrec::Corpus c;
  c.kind = kind;
  std::set<std::string> items;
  for (std::size_t u = 0; u < counts.size(); ++u) {
    reasonrec::UserRecord user;
    user.user_id = "u" + std::to_string(u);
    for (int j = 0; j < counts[u]; ++j) {
      const std::string item = "i" + std::to_string(j);
      user.interactions.push_back(interaction(user.user_id, item, 1 + (j + static_cast<int>(u)) % 5, 100 + j));
      items.insert(item);
    }
    c.users.push_back(std::move(user));
  }
  for (const auto& id : items) {
    reasonrec::ItemRecord rec;
    rec.item_id = id;
    rec.title = "Title " + id;
    c.items.push_back(std::move(rec));
  }
  c.reindex();
  return c;
}

}  // namespace testing
