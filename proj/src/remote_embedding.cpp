#include "toolroute/remote_embedding.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "toolroute/errors.hpp"

namespace toolroute {

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)) {
  if (config_.dim == 0) throw Error(ErrorCode::invalid_argument, "embedding dimension must be positive");
  if (config_.max_attempts < 1) config_.max_attempts = 1;
  if (config_.batch_size == 0) config_.batch_size = 1;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr) api_key_ = key;
}

std::string RemoteEmbeddingProvider::id() const {
  return "openai:" + config_.model + ":" + std::to_string(config_.dim);
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::embed_raw(
    std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t b = 0; b < texts.size(); b += config_.batch_size) {
    const std::size_t n = std::min(config_.batch_size, texts.size() - b);
    auto part = embed_batch(texts.subspan(b, n));
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> RemoteEmbeddingProvider::embed_batch(
    std::span<const std::string> texts) const {
  if (api_key_.empty())
    throw Error(ErrorCode::provider_failure,
                "environment variable " + config_.api_key_env + " is not set");

  const nlohmann::json body = {{"model", config_.model},
                               {"input", std::vector<std::string>(texts.begin(), texts.end())},
                               {"dimensions", config_.dim}};
  const std::string payload = body.dump();
  httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};

  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    ++attempts_;
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    auto res = client.Post("/v1/embeddings", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::provider_failure,
                  "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));

    try {
      const auto doc = nlohmann::json::parse(res->body);
      const auto& data = doc.at("data");
      std::vector<std::vector<double>> out(texts.size());
      for (const auto& item : data) {
        const auto i = item.at("index").get<std::size_t>();
        if (i >= out.size()) throw Error(ErrorCode::provider_failure, "response index out of range");
        out[i] = item.at("embedding").get<std::vector<double>>();
        if (out[i].size() != config_.dim)
          throw Error(ErrorCode::provider_failure, "response embedding has the wrong dimension");
      }
      for (const auto& v : out)
        if (v.empty()) throw Error(ErrorCode::provider_failure, "response is missing embeddings");
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::provider_failure, std::string("malformed response: ") + e.what());
    }
  }
  throw Error(ErrorCode::provider_failure,
              "giving up after " + std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

}  // namespace toolroute
