#include "reasonrec/sampler.hpp"

#include <algorithm>
#include <numeric>

#include "reasonrec/digest.hpp"
#include "reasonrec/error.hpp"
#include "reasonrec/rng.hpp"
#include "reasonrec/text.hpp"

namespace reasonrec {

std::array<std::size_t, 5> apportion_reviews(const std::array<std::size_t, 5>& counts, std::size_t budget) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total <= budget) return counts;

  std::array<std::size_t, 5> alloc{};
  std::array<std::size_t, 5> remainder{};  // numerator over `total`
  std::size_t assigned = 0;
  for (std::size_t r = 0; r < 5; ++r) {
    const std::size_t num = budget * counts[r];
    alloc[r] = std::min(num / total, counts[r]);
    remainder[r] = num % total;
    assigned += alloc[r];
  }

  std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });

  // Hand out leftover slots in remainder order; strata already full are
  // skipped, so the loop also absorbs any cascade.
  while (assigned < budget) {
    bool progressed = false;
    for (auto r : order) {
      if (assigned == budget) break;
      if (alloc[r] < counts[r]) {
        ++alloc[r];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return alloc;
}

ReviewSample select_reviews(const ItemRecord& item, std::size_t p, std::uint64_t seed) {
  if (p < 1) throw Error("select_reviews: p must be >= 1");
  ReviewSample sample;
  sample.item_id = item.item_id;
  for (int r = 1; r <= 5; ++r) sample.allocation[r] = 0;

  std::array<std::vector<std::size_t>, 5> strata;
  for (std::size_t i = 0; i < item.reviews.size(); ++i) {
    strata[item.reviews[i].rating.value() - 1].push_back(i);
  }
  std::array<std::size_t, 5> counts{};
  for (std::size_t r = 0; r < 5; ++r) counts[r] = strata[r].size();

  std::vector<std::size_t> chosen;
  if (item.reviews.size() <= p) {
    chosen.resize(item.reviews.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else {
    const auto alloc = apportion_reviews(counts, p);
    Rng rng(digest_u64(std::to_string(seed) + "\x1f" + item.item_id));
    for (int r = 4; r >= 0; --r) {
      auto picks = sample_indices(strata[r].size(), alloc[r], rng);
      std::sort(picks.begin(), picks.end());
      for (auto k : picks) chosen.push_back(strata[r][k]);
    }
  }

  for (auto idx : chosen) {
    const auto& review = item.reviews[idx];
    sample.selected.push_back(SelectedReview{review.rating, trim_words(review.text, kReviewWordLimit)});
    ++sample.allocation[review.rating.value()];
  }
  return sample;
}

}  // namespace reasonrec
