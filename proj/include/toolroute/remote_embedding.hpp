#pragma once

#include <atomic>
#include <chrono>
#include <string>

#include "toolroute/embedding.hpp"

namespace toolroute {

struct RemoteEmbeddingConfig {
  // scheme://host[:port]; the request path is /v1/embeddings.
  std::string base_url = "https://api.openai.com";
  std::string model = "text-embedding-3-large";
  std::size_t dim = 3072;
  // Name of the environment variable holding the bearer token. Read once, at
  // construction.
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t batch_size = 64;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{60};
};

/// OpenAI-compatible embeddings endpoint. Transport errors, HTTP 429 and 5xx
/// are retried with exponential backoff (initial_backoff, x2 per attempt);
/// other HTTP errors fail immediately. Failures surface as
/// Error(provider_failure).
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

  std::string id() const override;
  std::size_t dim() const override { return config_.dim; }
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) const override;

  /// Total HTTP attempts made so far (for diagnostics and tests).
  std::size_t attempts() const noexcept { return attempts_.load(); }

 private:
  std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) const;

  RemoteEmbeddingConfig config_;
  std::string api_key_;
  mutable std::atomic<std::size_t> attempts_{0};
};

}  // namespace toolroute
