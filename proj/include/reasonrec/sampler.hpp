#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reasonrec/corpus.hpp"

namespace reasonrec {

inline constexpr std::size_t kDefaultReviewsPerItem = 10;
inline constexpr std::size_t kReviewWordLimit = 50;

struct SelectedReview {
  RawRating rating{1};
  std::string text;  // at most kReviewWordLimit words

  bool operator==(const SelectedReview&) const = default;
};

struct ReviewSample {
  std::string item_id;
  std::vector<SelectedReview> selected;
  std::map<int, std::size_t> allocation;  // rating -> count, ratings 1..5

  bool operator==(const ReviewSample&) const = default;
};

// Per-rating quotas summing to min(budget, total). counts[r-1] is the number
// of reviews with rating r. Largest-remainder apportionment; equal remainders
// go to the lower rating first, and any slot a stratum cannot fill moves on
// in the same order.
std::array<std::size_t, 5> apportion_reviews(const std::array<std::size_t, 5>& counts, std::size_t budget);

// Stratified review selection for one item, deterministic in (item, p, seed).
ReviewSample select_reviews(const ItemRecord& item, std::size_t p, std::uint64_t seed);

}  // namespace reasonrec
