#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "toolroute/catalog.hpp"
#include "toolroute/embedding.hpp"
#include "toolroute/routing.hpp"

namespace toolroute {

struct EngineOptions {
  RoutingConfig routing;
  std::string provider = "fallback";
  std::uint64_t seed = 0;
  double not_found_floor = 0.1;
};

/// Explicitly supplied settings; unset members fall through to the next source.
struct OptionOverrides {
  std::optional<std::size_t> m;
  std::optional<std::size_t> k;
  std::optional<std::size_t> max_expanded_k;
  std::optional<double> epsilon;
  std::optional<bool> clamp;
  std::optional<std::string> provider;
  std::optional<std::uint64_t> seed;
  std::optional<double> not_found_floor;
  std::optional<std::string> config_file;
};

/// Reads overrides from a JSON object with keys m, k, max_expanded_k,
/// epsilon, clamp, provider, seed, not_found_floor, config_file. Unknown keys
/// are rejected.
OptionOverrides overrides_from_json(const OrderedJson& j);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// Precedence: explicit overrides > TOOLROUTE_* environment variables >
/// config file (overrides.config_file, else TOOLROUTE_CONFIG) > defaults.
/// When k exceeds max_expanded_k, max_expanded_k is raised to k.
EngineOptions resolve_options(const OptionOverrides& explicit_overrides,
                              const EnvLookup& env = process_env());

/// "fallback" (hashing, 256 dims) or "openai" (text-embedding-3-large).
std::unique_ptr<EmbeddingProvider> make_provider(const std::string& choice);

struct RetrieveRequestMessage {
  std::string server;
  std::string tool;
  std::optional<std::size_t> k;
  std::optional<bool> clamp;

  /// Throws Error(invalid_argument) or Error(empty_request_field) with the
  /// offending field as path.
  static RetrieveRequestMessage from_json(const OrderedJson& j);
};

struct CandidateMessage {
  std::string server_name;
  std::string tool_name;
  double score = 0.0;
  double s_server = 0.0;
  double s_tool = 0.0;
  std::string schema_text;
};

struct RetrieveResponseMessage {
  std::vector<CandidateMessage> candidates;
  std::size_t comparisons_made = 0;

  /// {"schema_version": 1, "candidates": [...], "comparisons_made": n}
  OrderedJson to_json() const;
};

/// Read-only query front over an immutable catalog and index. Safe to share
/// between threads.
class Engine {
 public:
  /// Throws Error(index_mismatch) when the index does not belong to the
  /// catalog or was built with a different provider.
  Engine(std::shared_ptr<const Catalog> catalog, std::shared_ptr<const EmbeddingIndex> index,
         std::shared_ptr<const EmbeddingProvider> provider, EngineOptions options);

  RetrieveResponseMessage retrieve(const RetrieveRequestMessage& request) const;
  /// Parses a JSON request body and returns the serialized response body.
  std::string retrieve_json(const std::string& body) const;
  OrderedJson health() const;

  /// Human-readable ranking: header, one tab-separated line per candidate
  /// with 6-decimal scores, then the comparison count.
  static std::string format_text(const RetrieveResponseMessage& response);

  const Catalog& catalog() const noexcept { return *catalog_; }
  const EmbeddingIndex& index() const noexcept { return *index_; }
  const EmbeddingProvider& provider() const noexcept { return *provider_; }
  const EngineOptions& options() const noexcept { return options_; }

 private:
  std::shared_ptr<const Catalog> catalog_;
  std::shared_ptr<const EmbeddingIndex> index_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  EngineOptions options_;
};

}  // namespace toolroute
