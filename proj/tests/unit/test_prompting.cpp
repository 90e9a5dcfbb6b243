#include <catch_amalgamated.hpp>

#include "reasonrec/error.hpp"
#include "reasonrec/prompting.hpp"
#include "reasonrec/text.hpp"

using namespace reasonrec;

namespace {

const TemplateRegistry& registry() {
  static const auto reg = TemplateRegistry::load(std::filesystem::path(REASONREC_SOURCE_DIR) / "templates");
  return reg;
}

HistoryEntry entry(int label, std::string title, std::string desc) {
  return HistoryEntry{BinaryLabel(label), ItemText{std::move(title), std::move(desc)}};
}

}  // namespace

TEST_CASE("render_template fills slots and optional blocks") {
  CHECK(render_template("a {x} b", {{"x", "1"}}) == "a 1 b");
  CHECK(render_template("a[[?x <{x}>]]b", {{"x", "1"}}) == "a<1>b");
  CHECK(render_template("a[[?x <{x}>]]b", {{"x", ""}}) == "ab");
  CHECK(render_template("a[[?x <{x}>]]b", {}) == "ab");
  CHECK(render_template("{ not a slot }", {}) == "{ not a slot }");
  // Substituted text is not rescanned.
  CHECK(render_template("{x}", {{"x", "{y}"}}) == "{y}");
  CHECK_THROWS_AS(render_template("{missing}", {}), Error);
  CHECK_THROWS_AS(render_template("[[?x oops", {{"x", "1"}}), Error);
}

TEST_CASE("template ids round-trip") {
  const auto id = TemplateId::parse("reasoning_rec/products/v2");
  CHECK(id.family == TemplateFamily::reasoning_rec);
  CHECK(id.dataset_kind == DatasetKind::products);
  CHECK(id.variant == "v2");
  CHECK(id.str() == "reasoning_rec/products/v2");
  CHECK_THROWS(TemplateId::parse("reasoning_rec/products"));
  CHECK_THROWS(TemplateId::parse("bogus/products/v1"));
}

TEST_CASE("registry holds every family for both dataset kinds") {
  for (auto kind : {DatasetKind::movies, DatasetKind::products}) {
    for (auto fam : {TemplateFamily::item_description, TemplateFamily::user_profile, TemplateFamily::reasoning_gt,
                     TemplateFamily::vanilla}) {
      CHECK(registry().contains(TemplateId{fam, kind, "v1"}));
    }
    for (const char* v : {"v1", "v2", "v3", "no_profile", "no_description"}) {
      CHECK(registry().contains(TemplateId{TemplateFamily::reasoning_rec, kind, v}));
    }
  }
}

TEST_CASE("golden user profile prompt for products") {
  PromptBuilder b(registry(), DatasetKind::products, "beauty", "mock-model");
  const auto bundle = b.user_profile({entry(1, "Rose Toner", "A mild toner."), entry(0, "Clay Mask", "")}, 100);
  const std::string expected =
      "You are an expert beauty product reviewer and recommender. You are provided with a user's list of recent "
      "products and their descriptions that the user purchases and whether the user liked it or disliked it. "
      "Please go through the list in order -\n"
      "Liked Rose Toner. Description: A mild toner.\n"
      "Disliked Clay Mask\n"
      "Analyze the provided list of products purchased by the user in order and summarize the user behavior by "
      "identifying the characteristics liked and disliked about the products in at most 100 words. Do not include "
      "information not present in the item descriptions.";
  CHECK(bundle.rendered == expected);
  CHECK(bundle.task == TaskKind::user_profile);
  CHECK(bundle.decoding == default_params(TaskKind::user_profile));
  CHECK(bundle.cache_key == compute_cache_key(bundle.rendered, bundle.decoding, "mock-model"));
  CHECK_THROWS_AS(b.user_profile({}, 100), ProfileUnavailable);
}

TEST_CASE("prediction prompts never carry the target label") {
  for (auto kind : {DatasetKind::movies, DatasetKind::products}) {
    PromptBuilder b(registry(), kind, "beauty", "m");
    const std::vector<HistoryEntry> hist{entry(1, "A", "desc a"), entry(0, "B", "desc b")};
    const ItemText target{"Target", "target desc"};
    for (const char* v : {"v1", "v2", "v3", "no_profile", "no_description"}) {
      const auto p = b.prediction(std::string("a profile"), hist, target, TemplateId{TemplateFamily::reasoning_rec, kind, v});
      CHECK(to_lower(p.rendered).find(kConditioningPhrase) == std::string::npos);
      CHECK(p.rendered.find("Target") != std::string::npos);
      CHECK(p.decoding.want_logprobs);
    }
    const auto van = b.prediction(std::nullopt, hist, target, TemplateId{TemplateFamily::vanilla, kind, "v1"});
    CHECK(to_lower(van.rendered).find(kConditioningPhrase) == std::string::npos);
    CHECK(van.rendered.find("desc a") == std::string::npos);
    // The reasoning ground-truth prompt does carry it.
    const auto gt = b.reasoning_gt(std::string("p"), hist, target, BinaryLabel(1));
    CHECK(to_lower(gt.rendered).find(kConditioningPhrase) != std::string::npos);
    CHECK(gt.rendered.find("will like") != std::string::npos);
    const auto gt0 = b.reasoning_gt(std::nullopt, hist, target, BinaryLabel(0));
    CHECK(gt0.rendered.find("will dislike") != std::string::npos);
  }
}

TEST_CASE("profile slot is dropped for the no_profile variant") {
  PromptBuilder b(registry(), DatasetKind::products, "beauty", "m");
  const std::vector<HistoryEntry> hist{entry(1, "A", "desc a")};
  const auto with = b.prediction(std::string("PROFILE_TEXT"), hist, {"T", "d"},
                                 TemplateId{TemplateFamily::reasoning_rec, DatasetKind::products, "v1"});
  const auto without = b.prediction(std::string("PROFILE_TEXT"), hist, {"T", "d"},
                                    TemplateId{TemplateFamily::reasoning_rec, DatasetKind::products, "no_profile"});
  CHECK(with.rendered.find("PROFILE_TEXT") != std::string::npos);
  CHECK(without.rendered.find("PROFILE_TEXT") == std::string::npos);
  CHECK(effective_prediction_variant("v2", false) == "no_profile");
  CHECK(effective_prediction_variant("v2", true) == "v2");
}

TEST_CASE("cache key depends on prompt, decoding and model") {
  DecodingParams d;
  const auto k = compute_cache_key("p", d, "m");
  CHECK(k.size() == 64);
  CHECK(k == compute_cache_key("p", d, "m"));
  CHECK(k != compute_cache_key("q", d, "m"));
  CHECK(k != compute_cache_key("p", d, "n"));
  auto d2 = d;
  d2.top_p = 0.75;
  CHECK(k != compute_cache_key("p", d2, "m"));
  auto d3 = d;
  d3.want_logprobs = true;
  CHECK(k != compute_cache_key("p", d3, "m"));
}

TEST_CASE("published decoding settings") {
  const auto prof = default_params(TaskKind::user_profile);
  CHECK(prof.temperature == 0.01);
  CHECK(prof.top_p == 0.9);
  CHECK(prof.max_new_tokens == 256);
  CHECK(default_params(TaskKind::item_description).max_new_tokens == 64);
  CHECK(default_params(TaskKind::reasoning_gt).top_p == 0.75);
  CHECK(default_params(TaskKind::zero_shot_predict).max_new_tokens == 300);
  CHECK(default_params(TaskKind::zero_shot_predict).want_logprobs);
  DecodingParams bad;
  bad.top_p = 0;
  CHECK_THROWS(validate(bad));
  bad.top_p = 0.5;
  bad.temperature = 0;
  CHECK_THROWS(validate(bad));
}
