#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "toolroute/catalog.hpp"
#include "toolroute/embedding.hpp"
#include "toolroute/request_protocol.hpp"

namespace toolroute {

struct RoutingConfig {
  std::size_t server_shortlist = 5;  // m; clamped to the catalog's server count
  std::size_t top_k = 1;
  double cluster_epsilon = 0.02;
  std::size_t max_expanded_k = 5;
  // Clamp both similarities to [0, 1] before combining. Off by default.
  bool clamp_similarities = false;

  /// Throws Error(invalid_argument) on zero sizes, negative epsilon, or
  /// top_k > max_expanded_k.
  void validate() const;
};

struct RankedTool {
  std::string server_name;
  std::string tool_name;
  ToolRef ref;
  double s_server = 0.0;
  double s_tool = 0.0;
  double score = 0.0;

  bool operator==(const RankedTool&) const = default;
};

struct RetrievalResult {
  /// Selected candidates: the leading `top_k` of `ranked`, widened by
  /// `expand_k` when scores cluster. For the brute-force oracle this is the
  /// full ranking.
  std::vector<RankedTool> candidates;
  /// Every scored (server, tool) pair, best first.
  std::vector<RankedTool> ranked;
  /// Stage-1 shortlist, best first. The oracle lists every server in catalog
  /// order.
  std::vector<std::size_t> shortlisted_servers;
  std::size_t comparisons_made = 0;
  ToolRequest request;
};

/// Combined ranking score: (s_server * s_tool) * max(s_server, s_tool).
double score_pair(double s_server, double s_tool);

/// Ranking order: score descending, then server name, then tool name.
bool ranks_before(const RankedTool& a, const RankedTool& b);

/// Leading candidates, extended past `top_k` while the next score stays
/// within `cluster_epsilon` of the best, capped at `max_expanded_k`.
std::vector<RankedTool> expand_k(std::span<const RankedTool> candidates, const RoutingConfig& cfg);

/// Pre-embedded request texts (unit vectors from the index's provider).
struct RequestEmbedding {
  std::vector<double> server;
  std::vector<double> tool;
};

RequestEmbedding embed_request(const ToolRequest& request, const EmbeddingProvider& provider);

/// Two-stage routing. Stage 1 ranks servers by max(similarity to description,
/// similarity to summary) and keeps the best `server_shortlist`; stage 2
/// scores every tool of the shortlisted servers. `comparisons_made` is
/// 2 * server count + tools in the shortlist.
///
/// Throws Error(empty_request_field) and Error(index_mismatch).
RetrievalResult route(const ToolRequest& request, const EmbeddingIndex& index, const Catalog& catalog,
                      const RoutingConfig& cfg, const EmbeddingProvider& provider);
RetrievalResult route(const ToolRequest& request, const RequestEmbedding& embedded,
                      const EmbeddingIndex& index, const Catalog& catalog, const RoutingConfig& cfg);

/// Exhaustive reference: scores every (server, tool) pair with the same
/// similarity definitions and no shortlist. `comparisons_made` is
/// 2 * server count + tool count.
RetrievalResult brute_force_route(const ToolRequest& request, const EmbeddingIndex& index,
                                  const Catalog& catalog, const EmbeddingProvider& provider,
                                  bool clamp_similarities = false);
RetrievalResult brute_force_route(const ToolRequest& request, const RequestEmbedding& embedded,
                                  const EmbeddingIndex& index, const Catalog& catalog,
                                  bool clamp_similarities = false);

}  // namespace toolroute
