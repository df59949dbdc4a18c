#include "toolroute/routing.hpp"

#include <algorithm>
#include <numeric>

#include "toolroute/errors.hpp"

namespace toolroute {

void RoutingConfig::validate() const {
  if (server_shortlist == 0)
    throw Error(ErrorCode::invalid_argument, "server shortlist size must be positive", "m");
  if (top_k == 0) throw Error(ErrorCode::invalid_argument, "top_k must be positive", "k");
  if (max_expanded_k == 0)
    throw Error(ErrorCode::invalid_argument, "max_expanded_k must be positive", "max_expanded_k");
  if (top_k > max_expanded_k)
    throw Error(ErrorCode::invalid_argument, "top_k exceeds max_expanded_k", "k");
  if (!(cluster_epsilon >= 0.0))
    throw Error(ErrorCode::invalid_argument, "cluster_epsilon must be non-negative", "epsilon");
}

double score_pair(double s_server, double s_tool) {
  return (s_server * s_tool) * std::max(s_server, s_tool);
}

bool ranks_before(const RankedTool& a, const RankedTool& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.server_name != b.server_name) return a.server_name < b.server_name;
  return a.tool_name < b.tool_name;
}

std::vector<RankedTool> expand_k(std::span<const RankedTool> candidates, const RoutingConfig& cfg) {
  if (candidates.empty()) return {};
  const std::size_t cap = std::min(cfg.max_expanded_k, candidates.size());
  std::size_t k = std::min(cfg.top_k, candidates.size());
  const double threshold = candidates.front().score - cfg.cluster_epsilon;
  while (k < cap && candidates[k].score >= threshold) ++k;
  return {candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k)};
}

RequestEmbedding embed_request(const ToolRequest& request, const EmbeddingProvider& provider) {
  auto embed_field = [&](const std::string& text, const char* field) {
    try {
      return embed(text, provider).values;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::empty_text)
        throw Error(ErrorCode::empty_request_field, "request field is empty", field);
      throw Error(e.code(), e.what(), field);
    }
  };
  return {embed_field(request.server_text, "server"), embed_field(request.tool_text, "tool")};
}

namespace {

double maybe_clamp(double s, bool clamp) { return clamp ? std::clamp(s, 0.0, 1.0) : s; }

void check_dims(const RequestEmbedding& embedded, const EmbeddingIndex& index) {
  if (embedded.server.size() != index.dim() || embedded.tool.size() != index.dim())
    throw Error(ErrorCode::index_mismatch, "request embedding dimension differs from index");
}

}  // namespace

RetrievalResult route(const ToolRequest& request, const RequestEmbedding& embedded,
                      const EmbeddingIndex& index, const Catalog& catalog, const RoutingConfig& cfg) {
  cfg.validate();
  index.check_catalog(catalog);
  check_dims(embedded, index);

  RetrievalResult result;
  result.request = request;

  // Stage 1: dual-matched server similarity over every server.
  const std::size_t servers = catalog.server_count();
  std::vector<double> s_server(servers);
  for (std::size_t i = 0; i < servers; ++i) {
    const auto& sv = index.server(i);
    s_server[i] = std::max(dot(embedded.server, sv.description), dot(embedded.server, sv.summary));
  }
  result.comparisons_made = 2 * servers;

  std::vector<std::size_t> order(servers);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t m = std::min(cfg.server_shortlist, servers);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (s_server[a] != s_server[b]) return s_server[a] > s_server[b];
                      return catalog.server(a).name < catalog.server(b).name;
                    });
  order.resize(m);
  result.shortlisted_servers = order;

  // Stage 2: tools of shortlisted servers only.
  for (std::size_t i : order) {
    const auto& server = catalog.server(i);
    const auto& sv = index.server(i);
    const double ss = maybe_clamp(s_server[i], cfg.clamp_similarities);
    for (std::size_t j = 0; j < server.tools.size(); ++j) {
      const double st = maybe_clamp(dot(embedded.tool, sv.tools[j]), cfg.clamp_similarities);
      ++result.comparisons_made;
      result.ranked.push_back({server.name, server.tools[j].name, {i, j}, ss, st, score_pair(ss, st)});
    }
  }
  std::sort(result.ranked.begin(), result.ranked.end(), ranks_before);
  result.candidates = expand_k(result.ranked, cfg);
  return result;
}

RetrievalResult route(const ToolRequest& request, const EmbeddingIndex& index, const Catalog& catalog,
                      const RoutingConfig& cfg, const EmbeddingProvider& provider) {
  cfg.validate();
  index.check_compatible(catalog, provider);
  return route(request, embed_request(request, provider), index, catalog, cfg);
}

// The oracle deliberately shares nothing with route() beyond the similarity
// primitive, score_pair and the ranking order.
RetrievalResult brute_force_route(const ToolRequest& request, const RequestEmbedding& embedded,
                                  const EmbeddingIndex& index, const Catalog& catalog,
                                  bool clamp_similarities) {
  index.check_catalog(catalog);
  check_dims(embedded, index);

  RetrievalResult result;
  result.request = request;
  for (std::size_t i = 0; i < catalog.server_count(); ++i) {
    const auto& server = catalog.server(i);
    const auto& sv = index.server(i);
    const double by_description = dot(embedded.server, sv.description);
    const double by_summary = dot(embedded.server, sv.summary);
    result.comparisons_made += 2;
    const double ss = maybe_clamp(std::max(by_description, by_summary), clamp_similarities);
    for (std::size_t j = 0; j < server.tools.size(); ++j) {
      const double st = maybe_clamp(dot(embedded.tool, sv.tools[j]), clamp_similarities);
      ++result.comparisons_made;
      result.ranked.push_back({server.name, server.tools[j].name, {i, j}, ss, st, score_pair(ss, st)});
    }
    result.shortlisted_servers.push_back(i);
  }
  std::sort(result.ranked.begin(), result.ranked.end(), ranks_before);
  result.candidates = result.ranked;
  return result;
}

RetrievalResult brute_force_route(const ToolRequest& request, const EmbeddingIndex& index,
                                  const Catalog& catalog, const EmbeddingProvider& provider,
                                  bool clamp_similarities) {
  index.check_compatible(catalog, provider);
  return brute_force_route(request, embed_request(request, provider), index, catalog,
                           clamp_similarities);
}

}  // namespace toolroute
