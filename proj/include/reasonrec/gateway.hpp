#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include "reasonrec/decoding.hpp"
#include "reasonrec/prompting.hpp"

namespace reasonrec {

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;

  bool operator==(const TokenLogprob&) const = default;
};

// Top alternatives at each of the first few generated positions.
using PositionLogprobs = std::vector<std::vector<TokenLogprob>>;

struct LlmResponse {
  std::string text;
  std::optional<PositionLogprobs> first_token_logprobs;
  std::string model_id;
  bool cached = false;
};

enum class BackendKind { http, mock };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string base_url;
  std::string api_key;
  std::string model = "mock-llm";
  int max_retries = 5;
  std::chrono::milliseconds base_backoff{500};
  std::chrono::milliseconds max_backoff{30000};
  std::chrono::seconds timeout{120};
  int max_in_flight = 4;
  std::size_t logprob_positions = 16;

  // Overlays LLM_BASE_URL, LLM_API_KEY and LLM_MODEL when set.
  void apply_env();
};

// Deterministic offline completion: "Prediction: Yes|No" picked by the parity
// of the prompt digest, then filler reasoning, with Yes/No logprobs at the
// third position.
LlmResponse mock_complete(const PromptBundle& bundle, std::string_view model_id = "mock-llm");

// Disk cache laid out as `{dir}/{key[0:2]}/{key}.json` plus `{dir}/index.jsonl`.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<LlmResponse> get(const std::string& key) const;
  void put(const PromptBundle& bundle, const LlmResponse& response);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& key) const;

  std::filesystem::path dir_;
  std::mutex index_mu_;
};

// Chat-completion client. Consults the cache, then the backend with bounded
// retries. Identical in-flight keys share one backend call; at most
// `max_in_flight` backend calls run at once.
class Gateway {
 public:
  explicit Gateway(BackendConfig config, std::optional<std::filesystem::path> cache_dir = std::nullopt);

  LlmResponse complete(const PromptBundle& bundle);

  const BackendConfig& config() const { return config_; }

  // Backend invocations (HTTP requests or mock generations), cache misses only.
  std::size_t backend_calls() const { return backend_calls_; }
  // HTTP attempts including retries; always 0 for the mock backend.
  std::size_t network_attempts() const { return network_attempts_; }
  std::size_t cache_hits() const { return cache_hits_; }

  // Test hook: sleep inside each mock call.
  void set_mock_latency(std::chrono::milliseconds latency) { mock_latency_ = latency; }

 private:
  LlmResponse call_backend(const PromptBundle& bundle);
  LlmResponse http_complete(const PromptBundle& bundle);

  BackendConfig config_;
  std::optional<ResponseCache> cache_;
  std::counting_semaphore<1024> slots_;
  std::mutex inflight_mu_;
  std::unordered_map<std::string, std::shared_future<LlmResponse>> inflight_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> network_attempts_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::chrono::milliseconds mock_latency_{0};
};

struct TokenEmbeddings {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> vectors;  // one unit vector per token
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Throws on empty text.
  virtual TokenEmbeddings embed_tokens(std::string_view text) = 0;
};

// Hash-seeded static vectors: identical tokens map to identical vectors.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 32) : dim_(dim) {}
  TokenEmbeddings embed_tokens(std::string_view text) override;

 private:
  std::size_t dim_;
};

// POST {base_url}/v1/token-embeddings.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string base_url, std::string model, std::string api_key = {},
               std::chrono::seconds timeout = std::chrono::seconds(60));
  TokenEmbeddings embed_tokens(std::string_view text) override;

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// Lowercased word and punctuation tokens used by the mock embedder.
std::vector<std::string> simple_tokenize(std::string_view text);

// Scales each vector to unit L2 norm (zero vectors are left as is).
void l2_normalize(std::vector<std::vector<double>>& vectors);

}  // namespace reasonrec
