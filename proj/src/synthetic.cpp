#include "reasonrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/rng.hpp"

namespace reasonrec {

namespace {

constexpr const char* kProducts[] = {"Shampoo", "Conditioner", "Face Serum", "Lip Balm",    "Night Cream",
                                     "Sunscreen", "Hair Oil",  "Body Lotion", "Eye Shadow", "Nail Polish",
                                     "Cleanser",  "Toner",     "Face Mask",   "Perfume",    "Mascara"};
constexpr const char* kAdjectives[] = {"Hydrating", "Gentle",  "Daily",  "Organic", "Matte",  "Radiant",
                                       "Soothing",  "Classic", "Fresh",  "Velvet",  "Repair", "Herbal"};
constexpr const char* kBrands[] = {"Lumen", "Aster", "Nordby", "Verde", "Solace", "Kiri", "Marlow", "Peony"};

constexpr const char* kGood[] = {"love",    "great",    "smooth",  "lasting", "pleasant", "soft",
                                 "perfect", "worth",    "lovely",  "gentle",  "works",    "recommend"};
constexpr const char* kBad[] = {"broke",  "greasy", "harsh",  "cheap",   "itchy", "faded",
                                "sticky", "return", "weak",   "leaked",  "dull",  "disappointed"};
constexpr const char* kNeutral[] = {"the",     "bottle", "scent",   "texture", "skin",  "after",  "using",
                                    "it",      "for",    "weeks",   "and",     "my",    "with",   "package",
                                    "arrived", "size",   "morning", "evening", "price", "formula"};

template <std::size_t N>
const char* pick(const char* const (&words)[N], Rng& rng) {
  return words[uniform_below(rng, N)];
}

std::string review_text(int rating, Rng& rng) {
  const std::size_t len = 12 + uniform_below(rng, 60);  // some exceed the 50-word trim
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) out.push_back(' ');
    const auto roll = uniform_below(rng, 10);
    if (roll < 3) {
      out += rating >= 4 ? pick(kGood, rng) : rating <= 2 ? pick(kBad, rng) : (roll == 0 ? pick(kGood, rng) : pick(kBad, rng));
    } else {
      out += pick(kNeutral, rng);
    }
  }
  out.push_back('.');
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string asin_for(std::size_t j) {
  std::string s = std::to_string(j);
  return "B0SYN" + std::string(5 - std::min<std::size_t>(5, s.size()), '0') + s;
}

}  // namespace

SyntheticFiles make_synthetic(const SyntheticSpec& spec) {
  if (spec.users == 0 || spec.items == 0) throw Error("synthetic: users and items must be positive");
  if (spec.min_interactions == 0 || spec.min_interactions > spec.max_interactions) {
    throw Error("synthetic: need 0 < min_interactions <= max_interactions");
  }
  if (spec.max_interactions > spec.items) throw Error("synthetic: max_interactions exceeds item count");
  Rng rng(spec.seed);

  // Item quality drives ratings; index order doubles as popularity rank.
  std::vector<double> quality(spec.items);
  for (auto& q : quality) q = 1.5 + 3.3 * uniform_unit(rng);

  std::vector<std::size_t> lengths(spec.users);
  for (auto& l : lengths) l = spec.min_interactions + uniform_below(rng, spec.max_interactions - spec.min_interactions + 1);

  // Every item is assigned to someone first, then the rest is drawn with a
  // popularity skew.
  std::vector<std::set<std::size_t>> owned(spec.users);
  std::vector<std::size_t> order(spec.items);
  for (std::size_t j = 0; j < spec.items; ++j) order[j] = j;
  fisher_yates(order, rng);
  std::size_t u = 0;
  for (auto j : order) {
    for (std::size_t tries = 0; tries < spec.users && owned[u].size() >= lengths[u]; ++tries) u = (u + 1) % spec.users;
    if (owned[u].size() >= lengths[u]) lengths[u]++;
    owned[u].insert(j);
    u = (u + 1) % spec.users;
  }
  for (std::size_t i = 0; i < spec.users; ++i) {
    while (owned[i].size() < lengths[i]) {
      // Cubing a uniform draw favours low indices.
      const double x = uniform_unit(rng);
      owned[i].insert(std::min(spec.items - 1, static_cast<std::size_t>(x * x * x * static_cast<double>(spec.items))));
    }
  }

  std::vector<json> reviews;
  for (std::size_t i = 0; i < spec.users; ++i) {
    const std::string user = "U" + std::to_string(1000 + i);
    const double bias = (uniform_unit(rng) - 0.5) * 1.6;
    std::vector<std::size_t> seq(owned[i].begin(), owned[i].end());
    fisher_yates(seq, rng);
    std::int64_t ts = 1400000000 + static_cast<std::int64_t>(uniform_below(rng, 5000000));
    for (auto j : seq) {
      ts += 3600 + static_cast<std::int64_t>(uniform_below(rng, 30 * 86400));
      const double noisy = quality[j] + bias + (uniform_unit(rng) - 0.5) * 1.5;
      const int rating = std::clamp(static_cast<int>(std::lround(noisy)), 1, 5);
      json r = {{"reviewerID", user},
                {"asin", asin_for(j)},
                {"overall", static_cast<double>(rating)},
                {"unixReviewTime", ts},
                {"reviewText", review_text(rating, rng)},
                {"summary", rating >= 4 ? "Recommended" : rating <= 2 ? "Not for me" : "It is okay"}};
      reviews.push_back(std::move(r));
    }
  }

  // Loader quirks.
  if (reviews.size() > 3) {
    if (reviews[1]["overall"].get<double>() < 5.0) reviews[1]["overall"] = reviews[1]["overall"].get<double>() + 0.5;
    reviews[2].erase("reviewText");
  }
  reviews.push_back({{"asin", asin_for(0)}, {"overall", 3.0}, {"reviewText", "No reviewer id on this record."}});

  // Distinct adjective/product pairs while they last.
  constexpr std::size_t n_adj = std::size(kAdjectives), n_prod = std::size(kProducts);
  const auto combos = sample_indices(n_adj * n_prod, std::min(spec.items, n_adj * n_prod), rng);
  std::vector<json> meta;
  for (std::size_t j = 0; j < spec.items; ++j) {
    if (j == spec.items - 1 && spec.items > 1) continue;  // no metadata for the last item
    const auto c = combos[j % combos.size()];
    std::string title = std::string(kAdjectives[c / n_prod]) + " " + kProducts[c % n_prod];
    if (j >= combos.size()) title += " " + std::to_string(j / combos.size() + 1);
    if (j == 3) title = "Cr\xC3\xA8me Br\xC3\xBBl\xC3\xA9" " Lip Balm";
    json m = {{"asin", asin_for(j)}, {"title", title}, {"brand", pick(kBrands, rng)}};
    if (j % 4 != 1) {
      const auto cents = 499 + uniform_below(rng, 4000);
      m["price"] = "$" + std::to_string(cents / 100) + "." + (cents % 100 < 10 ? "0" : "") + std::to_string(cents % 100);
    }
    if (j % 5 != 2) m["description"] = json::array({title + " for everyday use.", "Made by " + m["brand"].get<std::string>() + "."});
    meta.push_back(std::move(m));
  }
  return {to_jsonl(reviews), to_jsonl(meta)};
}

void write_synthetic(const fs::path& dir, const SyntheticSpec& spec) {
  const auto files = make_synthetic(spec);
  fs::create_directories(dir);
  write_file_atomic(dir / "reviews.jsonl", files.reviews);
  write_file_atomic(dir / "meta.jsonl", files.metadata);
}

}  // namespace reasonrec
