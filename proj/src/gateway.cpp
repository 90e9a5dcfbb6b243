#include "reasonrec/gateway.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "reasonrec/digest.hpp"
#include "reasonrec/error.hpp"
#include "reasonrec/jsonl.hpp"
#include "reasonrec/log.hpp"
#include "reasonrec/rng.hpp"

namespace reasonrec {

// ---------------------------------------------------------------------------
// Decoding parameters

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::item_description: return "item_description";
    case TaskKind::user_profile: return "user_profile";
    case TaskKind::reasoning_gt: return "reasoning_gt";
    case TaskKind::zero_shot_predict: return "zero_shot_predict";
    case TaskKind::finetuned_predict: return "finetuned_predict";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  for (auto t : {TaskKind::item_description, TaskKind::user_profile, TaskKind::reasoning_gt,
                 TaskKind::zero_shot_predict, TaskKind::finetuned_predict}) {
    if (name == to_string(t)) return t;
  }
  throw Error("unknown task kind '" + std::string(name) + "'");
}

DecodingParams default_params(TaskKind task) {
  switch (task) {
    case TaskKind::user_profile: return {0.01, 0.9, 256, false};
    case TaskKind::item_description: return {0.01, 0.9, 64, false};
    case TaskKind::reasoning_gt: return {0.01, 0.75, 256, false};
    case TaskKind::zero_shot_predict: return {0.01, 0.9, 300, true};
    case TaskKind::finetuned_predict: return {0.01, 0.9, 256, true};
  }
  return {};
}

void validate(const DecodingParams& p) {
  if (!(p.temperature > 0.0)) throw ConfigError("temperature", "must be > 0");
  if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw ConfigError("top_p", "must be in (0, 1]");
  if (p.max_new_tokens < 1) throw ConfigError("max_new_tokens", "must be >= 1");
}

std::string_view to_string(BackendKind kind) { return kind == BackendKind::http ? "http" : "mock"; }

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "http") return BackendKind::http;
  if (name == "mock") return BackendKind::mock;
  throw ConfigError("backend", "expected 'http' or 'mock', got '" + std::string(name) + "'");
}

void BackendConfig::apply_env() {
  if (const char* v = std::getenv("LLM_BASE_URL"); v && *v) base_url = v;
  if (const char* v = std::getenv("LLM_API_KEY"); v && *v) api_key = v;
  if (const char* v = std::getenv("LLM_MODEL"); v && *v) model = v;
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

constexpr const char* kMockVocabulary[] = {
    "user",      "enjoys",     "prefers",   "quality",   "style",     "comfortable", "price",   "value",
    "recent",    "history",    "liked",     "disliked",  "features",  "durable",     "cheap",   "elegant",
    "story",     "characters", "genre",     "pacing",    "drama",     "comedy",      "fit",     "size",
    "material",  "scent",      "texture",   "brand",     "reviews",   "consistent",  "mixed",   "positive",
    "negative",  "likely",     "unlikely",  "because",   "similar",   "previous",    "target",  "item"};

}  // namespace

LlmResponse mock_complete(const PromptBundle& bundle, std::string_view model_id) {
  const auto d = sha256(bundle.rendered);
  const bool yes = (d[31] & 1) == 0;
  const double u = d[30] / 255.0;
  const double p_yes = yes ? 0.51 + 0.48 * u : 0.49 - 0.48 * u;

  Rng rng(digest_u64(bundle.rendered));
  std::string filler;
  constexpr std::size_t vocab = sizeof(kMockVocabulary) / sizeof(kMockVocabulary[0]);
  for (int i = 0; i < 24; ++i) {
    if (i) filler.push_back(' ');
    filler += kMockVocabulary[uniform_below(rng, vocab)];
  }

  LlmResponse r;
  r.text = std::string("Prediction: ") + (yes ? "Yes" : "No") + "\nThe " + filler + ".";
  r.first_token_logprobs = PositionLogprobs{{{"Prediction", 0.0}},
                                            {{":", 0.0}},
                                            {{" Yes", std::log(p_yes)}, {" No", std::log(1.0 - p_yes)}}};
  if (!yes) std::swap((*r.first_token_logprobs)[2][0], (*r.first_token_logprobs)[2][1]);
  r.model_id = std::string(model_id);
  return r;
}

// ---------------------------------------------------------------------------
// Cache

namespace {

json logprobs_to_json(const std::optional<PositionLogprobs>& lp) {
  if (!lp) return nullptr;
  json out = json::array();
  for (const auto& pos : *lp) {
    json alts = json::array();
    for (const auto& t : pos) alts.push_back({{"token", t.token}, {"logprob", t.logprob}});
    out.push_back(alts);
  }
  return out;
}

std::optional<PositionLogprobs> logprobs_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  PositionLogprobs out;
  for (const auto& pos : j) {
    std::vector<TokenLogprob> alts;
    for (const auto& t : pos) alts.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
    out.push_back(std::move(alts));
  }
  return out;
}

long long now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::file_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<LlmResponse> ResponseCache::get(const std::string& key) const {
  const auto path = file_for(key);
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json j = json::parse(read_file(path));
    LlmResponse r;
    r.text = j.at("text").get<std::string>();
    r.first_token_logprobs = logprobs_from_json(j.value("logprobs", json()));
    r.model_id = j.value("model", "");
    r.cached = true;
    return r;
  } catch (const std::exception& e) {
    log::warn("unreadable cache entry ignored", {{"path", path.string()}, {"error", e.what()}});
    return std::nullopt;
  }
}

void ResponseCache::put(const PromptBundle& bundle, const LlmResponse& response) {
  const auto path = file_for(bundle.cache_key);
  const json entry = {{"key", bundle.cache_key},
                      {"request_digest", sha256_hex(bundle.rendered)},
                      {"model", bundle.model_id},
                      {"template", bundle.tmpl.str()},
                      {"params",
                       {{"temperature", bundle.decoding.temperature},
                        {"top_p", bundle.decoding.top_p},
                        {"max_new_tokens", bundle.decoding.max_new_tokens},
                        {"want_logprobs", bundle.decoding.want_logprobs}}},
                      {"text", response.text},
                      {"logprobs", logprobs_to_json(response.first_token_logprobs)},
                      {"timestamp", now_seconds()}};
  write_file_atomic(path, entry.dump(2) + "\n");
  std::lock_guard lock(index_mu_);
  std::ofstream idx(dir_ / "index.jsonl", std::ios::app | std::ios::binary);
  idx << json{{"key", bundle.cache_key}, {"path", fs::relative(path, dir_).string()}, {"timestamp", now_seconds()}}
             .dump()
      << '\n';
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(BackendConfig config, std::optional<fs::path> cache_dir)
    : config_(std::move(config)), slots_(std::max(1, std::min(config_.max_in_flight, 1024))) {
  if (config_.max_retries < 0) throw ConfigError("llm.max_retries", "must be >= 0");
  if (config_.kind == BackendKind::http && config_.base_url.empty()) {
    throw ConfigError("llm.base_url", "required for the http backend (or set LLM_BASE_URL)");
  }
  if (cache_dir) cache_.emplace(*cache_dir);
}

LlmResponse Gateway::complete(const PromptBundle& bundle) {
  if (bundle.cache_key.empty()) throw Error("prompt bundle has no cache key");
  if (cache_) {
    if (auto hit = cache_->get(bundle.cache_key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  std::promise<LlmResponse> promise;
  {
    std::unique_lock lock(inflight_mu_);
    if (auto it = inflight_.find(bundle.cache_key); it != inflight_.end()) {
      auto shared = it->second;
      lock.unlock();
      LlmResponse r = shared.get();
      r.cached = true;
      ++cache_hits_;
      return r;
    }
    inflight_.emplace(bundle.cache_key, promise.get_future().share());
  }

  auto finish = [&] {
    std::lock_guard lock(inflight_mu_);
    inflight_.erase(bundle.cache_key);
  };

  try {
    // A concurrent leader may have finished between our miss and registration.
    std::optional<LlmResponse> result;
    if (cache_) result = cache_->get(bundle.cache_key);
    if (result) {
      ++cache_hits_;
    } else {
      slots_.acquire();
      try {
        result = call_backend(bundle);
      } catch (...) {
        slots_.release();
        throw;
      }
      slots_.release();
      result->cached = false;
      if (cache_) cache_->put(bundle, *result);
    }
    promise.set_value(*result);
    finish();
    return *result;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

LlmResponse Gateway::call_backend(const PromptBundle& bundle) {
  ++backend_calls_;
  if (config_.kind == BackendKind::mock) {
    if (mock_latency_.count() > 0) std::this_thread::sleep_for(mock_latency_);
    return mock_complete(bundle, config_.model);
  }
  return http_complete(bundle);
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.prefix = url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

std::string server_message(const std::string& body) {
  try {
    const auto j = json::parse(body);
    if (j.contains("error")) {
      const auto& e = j["error"];
      if (e.is_object() && e.contains("message")) return e["message"].get<std::string>();
      if (e.is_string()) return e.get<std::string>();
    }
  } catch (const std::exception&) {
  }
  return body.substr(0, 500);
}

std::chrono::milliseconds backoff_delay(const BackendConfig& cfg, int attempt) {
  static thread_local std::mt19937_64 jitter{std::random_device{}()};
  const double base = static_cast<double>(cfg.base_backoff.count()) * std::pow(2.0, attempt);
  const double capped = std::min(base, static_cast<double>(cfg.max_backoff.count()));
  const double factor = 0.5 + 0.5 * uniform_unit(jitter);
  return std::chrono::milliseconds(static_cast<long long>(capped * factor));
}

std::optional<PositionLogprobs> parse_openai_logprobs(const json& choice, std::size_t max_positions) {
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) return std::nullopt;
  const auto& lp = choice["logprobs"];
  if (!lp.contains("content") || !lp["content"].is_array()) return std::nullopt;
  PositionLogprobs out;
  for (const auto& pos : lp["content"]) {
    if (out.size() >= max_positions) break;
    std::vector<TokenLogprob> alts;
    if (pos.contains("token") && pos.contains("logprob")) {
      alts.push_back({pos["token"].get<std::string>(), pos["logprob"].get<double>()});
    }
    if (pos.contains("top_logprobs") && pos["top_logprobs"].is_array()) {
      for (const auto& t : pos["top_logprobs"]) {
        TokenLogprob tl{t.at("token").get<std::string>(), t.at("logprob").get<double>()};
        if (std::find(alts.begin(), alts.end(), tl) == alts.end()) alts.push_back(std::move(tl));
      }
    }
    out.push_back(std::move(alts));
  }
  return out;
}

}  // namespace

LlmResponse Gateway::http_complete(const PromptBundle& bundle) {
  const auto url = split_url(config_.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count());
  client.set_read_timeout(config_.timeout.count());
  client.set_write_timeout(config_.timeout.count());
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  json body = {{"model", config_.model},
               {"messages", json::array({{{"role", "user"}, {"content", bundle.rendered}}})},
               {"temperature", bundle.decoding.temperature},
               {"top_p", bundle.decoding.top_p},
               {"max_tokens", bundle.decoding.max_new_tokens},
               {"logprobs", bundle.decoding.want_logprobs}};
  if (bundle.decoding.want_logprobs) body["top_logprobs"] = 5;
  const auto payload = body.dump();
  const auto path = url.prefix + "/v1/chat/completions";

  std::string last_error;
  const int max_attempts = 1 + config_.max_retries;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    ++network_attempts_;
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        const auto j = json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        LlmResponse r;
        r.text = choice.at("message").at("content").get<std::string>();
        r.first_token_logprobs = parse_openai_logprobs(choice, config_.logprob_positions);
        r.model_id = j.value("model", config_.model);
        return r;
      } catch (const std::exception& e) {
        throw Error(std::string("malformed chat completion response: ") + e.what());
      }
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + server_message(res->body);
    } else {
      throw RequestError(res->status, server_message(res->body));
    }
    if (attempt + 1 < max_attempts) {
      const auto delay = backoff_delay(config_, attempt);
      log::info("retrying chat completion", {{"attempt", attempt + 1}, {"delay_ms", delay.count()}, {"error", last_error}});
      std::this_thread::sleep_for(delay);
    }
  }
  throw TransportError(max_attempts, last_error);
}

// ---------------------------------------------------------------------------
// Embeddings

std::vector<std::string> simple_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      if (!std::isspace(c)) tokens.emplace_back(1, ch);
    }
  }
  flush();
  return tokens;
}

void l2_normalize(std::vector<std::vector<double>>& vectors) {
  for (auto& v : vectors) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
  }
}

TokenEmbeddings MockEmbedder::embed_tokens(std::string_view text) {
  TokenEmbeddings out;
  out.tokens = simple_tokenize(text);
  if (out.tokens.empty()) throw Error("embed_tokens: empty text");
  for (const auto& tok : out.tokens) {
    Rng rng(digest_u64("emb\x1f" + tok));
    std::vector<double> v(dim_);
    for (auto& x : v) x = 2.0 * uniform_unit(rng) - 1.0;
    out.vectors.push_back(std::move(v));
  }
  l2_normalize(out.vectors);
  return out;
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::string model, std::string api_key, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), model_(std::move(model)), api_key_(std::move(api_key)), timeout_(timeout) {}

TokenEmbeddings HttpEmbedder::embed_tokens(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) throw Error("embed_tokens: empty text");
  const auto url = split_url(base_url_);
  httplib::Client client(url.origin);
  client.set_read_timeout(timeout_.count());
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const json body = {{"model", model_}, {"input", text}};
  auto res = client.Post(url.prefix + "/v1/token-embeddings", headers, body.dump(), "application/json");
  if (!res) throw TransportError(1, "embedding request failed: " + httplib::to_string(res.error()));
  const std::string hint = "backend has no token-level embedding endpoint; use the bundled mock embedder (--backend mock)";
  if (res->status == 404 || res->status == 405 || res->status == 501) throw CapabilityError(hint);
  if (res->status != 200) throw RequestError(res->status, server_message(res->body));
  TokenEmbeddings out;
  try {
    const auto j = json::parse(res->body);
    if (!j.contains("tokens") || !j.contains("vectors")) throw CapabilityError(hint);
    out.tokens = j["tokens"].get<std::vector<std::string>>();
    out.vectors = j["vectors"].get<std::vector<std::vector<double>>>();
  } catch (const CapabilityError&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(std::string("malformed token-embedding response: ") + e.what());
  }
  if (out.tokens.size() != out.vectors.size() || out.tokens.empty()) {
    throw Error("token-embedding response has mismatched tokens and vectors");
  }
  for (const auto& v : out.vectors) {
    if (v.size() != out.vectors.front().size()) throw Error("token-embedding vectors differ in dimension");
  }
  l2_normalize(out.vectors);
  return out;
}

}  // namespace reasonrec
