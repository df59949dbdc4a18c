#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toolroute/catalog.hpp"

namespace toolroute {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;

  std::size_t dim() const noexcept { return values.size(); }
};

/// Source of raw text embeddings. `embed_raw` returns one vector of length
/// `dim()` per input, in input order; vectors need not be normalized.
/// Implementations must be safe to call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) const = 0;
};

/// Deterministic offline embedder. Text is lowercased and split on
/// non-alphanumerics; each token adds +1 or -1 (sign hash) to one of `dim`
/// buckets (bucket hash); the sum is L2-normalized downstream. Counts are
/// accumulated as integers, so the result depends only on the token multiset.
class HashingEmbeddingProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit HashingEmbeddingProvider(std::size_t dim = kDefaultDim);

  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) const override;

  static std::vector<std::string> tokenize(std::string_view text);
  static std::uint64_t bucket_hash(std::string_view token);
  static std::uint64_t sign_hash(std::string_view token);

 private:
  std::size_t dim_;
};

/// Scales `values` to unit length in place. Throws Error(zero_vector).
void normalize(std::vector<double>& values, const std::string& path = {});

double dot(std::span<const double> a, std::span<const double> b);

/// Embeds and normalizes one text. Throws Error(empty_text) when `text` is
/// blank, Error(zero_vector) when the provider returns a zero vector, and
/// propagates Error(provider_failure).
EmbeddingVector embed(std::string_view text, const EmbeddingProvider& provider);

/// Cosine similarity. When both inputs are already unit length (to 1e-9 on the
/// squared norm) the result is exactly their dot product.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Normalized embeddings for one catalog: per server the description and the
/// summary, per tool the description. Immutable once built.
class EmbeddingIndex {
 public:
  struct ServerVectors {
    std::vector<double> description;
    std::vector<double> summary;
    std::vector<std::vector<double>> tools;

    bool operator==(const ServerVectors&) const = default;
  };

  /// Validates dimensions, unit norms and the shape against `catalog`.
  static EmbeddingIndex from_parts(const Catalog& catalog, std::string provider_id, std::size_t dim,
                                   std::vector<ServerVectors> servers);

  const std::string& provider_id() const noexcept { return provider_id_; }
  std::size_t dim() const noexcept { return dim_; }
  const std::string& catalog_fingerprint() const noexcept { return fingerprint_; }
  const std::vector<ServerVectors>& servers() const noexcept { return servers_; }
  const ServerVectors& server(std::size_t i) const { return servers_.at(i); }

  /// 2 * server count + tool count.
  std::size_t entry_count() const noexcept { return entries_; }

  /// Throws Error(index_mismatch) when the index was not built from `catalog`
  /// with a provider of the same identity and dimension.
  void check_compatible(const Catalog& catalog, const EmbeddingProvider& provider) const;
  void check_catalog(const Catalog& catalog) const;

  bool operator==(const EmbeddingIndex&) const = default;

 private:
  EmbeddingIndex() = default;

  std::string provider_id_;
  std::size_t dim_ = 0;
  std::string fingerprint_;
  std::vector<ServerVectors> servers_;
  std::size_t entries_ = 0;
};

struct IndexBuildOptions {
  std::size_t batch_size = 64;
  // Number of batches in flight at once. Assembly is always in catalog order.
  std::size_t parallelism = 1;
};

EmbeddingIndex build_index(const Catalog& catalog, const EmbeddingProvider& provider,
                           const IndexBuildOptions& options = {});

/// Sidecar persistence. The format is a JSON document:
///   {"format": "toolroute-embedding-index", "version": 1,
///    "provider_id": ..., "dim": ..., "catalog_fingerprint": ...,
///    "entries": [{"path": "servers[0].server_description", "vector": [...]}, ...]}
/// Vectors are base-10 decimals that round-trip doubles exactly. Entries appear
/// in catalog order: description, summary, then each tool description.
inline constexpr int kIndexFormatVersion = 1;

std::string serialize_index(const EmbeddingIndex& index);
void save_index_file(const EmbeddingIndex& index, const std::string& path);
/// Throws Error(index_mismatch) when the fingerprint or shape disagrees with
/// `catalog`, Error(malformed_document) on a damaged file.
EmbeddingIndex load_index(std::istream& in, const Catalog& catalog);
EmbeddingIndex load_index_file(const std::string& path, const Catalog& catalog);

}  // namespace toolroute
