#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reasonrec {

enum class DatasetKind { movies, products };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

// Star rating in [1, 5].
class RawRating {
 public:
  explicit RawRating(int value);
  int value() const noexcept { return value_; }
  auto operator<=>(const RawRating&) const = default;

 private:
  int value_;
};

// 1 = like, 0 = dislike.
class BinaryLabel {
 public:
  explicit BinaryLabel(int value);
  static BinaryLabel like() { return BinaryLabel(1); }
  static BinaryLabel dislike() { return BinaryLabel(0); }
  int value() const noexcept { return value_; }
  bool liked() const noexcept { return value_ == 1; }
  auto operator<=>(const BinaryLabel&) const = default;

 private:
  int value_;
};

inline constexpr int kDefaultThreshold = 3;

// 1 iff raw > threshold. Throws on a threshold outside [1, 5].
BinaryLabel binarize(RawRating raw, int threshold);

struct Interaction {
  std::string user_id;
  std::string item_id;
  RawRating raw_rating{1};
  BinaryLabel label{0};
  std::int64_t timestamp = 0;
  std::optional<std::string> review_text;

  bool operator==(const Interaction&) const = default;
};

struct Review {
  RawRating rating{1};
  std::string text;
  std::string user_id;

  bool operator==(const Review&) const = default;
};

struct ItemRecord {
  std::string item_id;
  std::string title;
  std::map<std::string, std::string> metadata;
  std::vector<Review> reviews;
  std::optional<std::string> description;

  bool operator==(const ItemRecord&) const = default;
};

struct UserRecord {
  std::string user_id;
  std::vector<Interaction> interactions;  // timestamp ascending, stable
  std::optional<std::string> profile;

  bool operator==(const UserRecord&) const = default;
};

class Corpus {
 public:
  DatasetKind kind = DatasetKind::movies;
  int k_core = 1;
  int threshold = kDefaultThreshold;
  std::vector<UserRecord> users;
  std::vector<ItemRecord> items;

  // Rebuild the id lookups after mutating `users` or `items`.
  void reindex();

  const ItemRecord* find_item(std::string_view item_id) const;
  const UserRecord* find_user(std::string_view user_id) const;

  std::size_t interaction_count() const;

  bool operator==(const Corpus& other) const {
    return kind == other.kind && k_core == other.k_core && threshold == other.threshold &&
           users == other.users && items == other.items;
  }

 private:
  std::unordered_map<std::string, std::size_t> item_index_;
  std::unordered_map<std::string, std::size_t> user_index_;
};

struct IngestReport {
  std::size_t records = 0;
  std::size_t interactions = 0;
  std::size_t skipped_records = 0;
  std::size_t duplicates = 0;
  std::size_t truncated_ratings = 0;
  std::size_t items_without_metadata = 0;
};

// `UserID::MovieID::Rating::Timestamp` ratings, `MovieID::Title::Genres`
// movies, and optional `{"item_id", "plot"}` JSON lines.
Corpus parse_movie_dataset(const std::filesystem::path& ratings_file,
                           const std::filesystem::path& movies_file,
                           const std::optional<std::filesystem::path>& plots_file,
                           int threshold = kDefaultThreshold, IngestReport* report = nullptr);

// Amazon-style review and metadata JSON lines.
Corpus parse_product_dataset(const std::filesystem::path& reviews_file,
                             const std::filesystem::path& metadata_file,
                             int threshold = kDefaultThreshold, IngestReport* report = nullptr);

// Keep users with at least k interactions (one pass, users only), then drop
// items and reviews that no longer have a surviving interaction.
Corpus apply_k_core(const Corpus& corpus, int k);

// Canonical line-delimited format: a `corpus` header record, then `item`,
// `user` and `interaction` records.
std::string serialize_corpus(const Corpus& corpus);
Corpus deserialize_corpus(std::string_view text, const std::string& source_name = "<corpus>");
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace reasonrec
