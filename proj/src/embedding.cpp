#include "toolroute/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include "toolroute/errors.hpp"
#include "text_util.hpp"

namespace toolroute {

namespace {

constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
// Distinct offset basis for the sign hash so the two hashes are independent.
constexpr std::uint64_t kSignOffset = 0x84222325cbf29ce4ULL;

std::uint64_t fnv1a(std::string_view s, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr double kUnitTolerance = 1e-9;

bool is_unit(std::span<const double> v) { return std::abs(dot(v, v) - 1.0) <= kUnitTolerance; }

}  // namespace

// ---------------------------------------------------------------------------
// Hashing fallback

HashingEmbeddingProvider::HashingEmbeddingProvider(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw Error(ErrorCode::invalid_argument, "embedding dimension must be positive");
}

std::string HashingEmbeddingProvider::id() const { return "hashing-v1-" + std::to_string(dim_); }

std::vector<std::string> HashingEmbeddingProvider::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t HashingEmbeddingProvider::bucket_hash(std::string_view token) {
  return fnv1a(token, kFnvOffset);
}

std::uint64_t HashingEmbeddingProvider::sign_hash(std::string_view token) {
  return mix64(fnv1a(token, kSignOffset));
}

std::vector<std::vector<double>> HashingEmbeddingProvider::embed_raw(
    std::span<const std::string> texts) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  std::vector<std::int64_t> counts(dim_);
  for (const auto& text : texts) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& token : tokenize(text)) {
      const std::size_t bucket = bucket_hash(token) % dim_;
      counts[bucket] += (sign_hash(token) >> 63) != 0 ? -1 : 1;
    }
    out.emplace_back(counts.begin(), counts.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vector math

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::dimension_mismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void normalize(std::vector<double>& values, const std::string& path) {
  const double norm = std::sqrt(dot(values, values));
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw Error(ErrorCode::zero_vector, "cannot normalize a zero vector", path);
  for (auto& v : values) v /= norm;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(ErrorCode::dimension_mismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const double aa = dot(a, a);
  const double bb = dot(b, b);
  if (aa == 0.0 || bb == 0.0) throw Error(ErrorCode::zero_vector, "cosine of a zero vector");
  const double ab = dot(a, b);
  if (std::abs(aa - 1.0) <= kUnitTolerance && std::abs(bb - 1.0) <= kUnitTolerance) return ab;
  const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(std::span<const double>(a.values), std::span<const double>(b.values));
}

EmbeddingVector embed(std::string_view text, const EmbeddingProvider& provider) {
  if (detail::trim(text).empty()) throw Error(ErrorCode::empty_text, "text is empty");
  const std::string owned(text);
  auto raw = provider.embed_raw(std::span<const std::string>(&owned, 1));
  if (raw.size() != 1 || raw.front().size() != provider.dim())
    throw Error(ErrorCode::provider_failure, "provider returned a malformed embedding");
  EmbeddingVector v{std::move(raw.front()), provider.id()};
  normalize(v.values);
  return v;
}

// ---------------------------------------------------------------------------
// Index

namespace {

std::string server_path(std::size_t i) { return "servers[" + std::to_string(i) + "]"; }

std::string tool_path(std::size_t i, std::size_t j) {
  return server_path(i) + ".tools[" + std::to_string(j) + "].description";
}

void require_unit(const std::vector<double>& v, std::size_t dim, const std::string& path) {
  if (v.size() != dim)
    throw Error(ErrorCode::dimension_mismatch,
                "expected " + std::to_string(dim) + " components, got " + std::to_string(v.size()),
                path);
  if (!is_unit(v)) throw Error(ErrorCode::malformed_document, "vector is not unit length", path);
}

}  // namespace

EmbeddingIndex EmbeddingIndex::from_parts(const Catalog& catalog, std::string provider_id,
                                          std::size_t dim, std::vector<ServerVectors> servers) {
  if (dim == 0) throw Error(ErrorCode::invalid_argument, "embedding dimension must be positive");
  if (servers.size() != catalog.server_count())
    throw Error(ErrorCode::index_mismatch, "server count differs from catalog");
  std::size_t entries = 0;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    const auto& sv = servers[i];
    if (sv.tools.size() != catalog.server(i).tools.size())
      throw Error(ErrorCode::index_mismatch, "tool count differs from catalog",
                  server_path(i) + ".tools");
    require_unit(sv.description, dim, server_path(i) + ".server_description");
    require_unit(sv.summary, dim, server_path(i) + ".server_summary");
    for (std::size_t j = 0; j < sv.tools.size(); ++j) require_unit(sv.tools[j], dim, tool_path(i, j));
    entries += 2 + sv.tools.size();
  }
  EmbeddingIndex idx;
  idx.provider_id_ = std::move(provider_id);
  idx.dim_ = dim;
  idx.fingerprint_ = catalog.fingerprint();
  idx.servers_ = std::move(servers);
  idx.entries_ = entries;
  return idx;
}

void EmbeddingIndex::check_catalog(const Catalog& catalog) const {
  if (catalog.fingerprint() != fingerprint_)
    throw Error(ErrorCode::index_mismatch, "index was built from a different catalog (fingerprint " +
                                               fingerprint_ + ", catalog " +
                                               catalog.fingerprint() + ")");
}

void EmbeddingIndex::check_compatible(const Catalog& catalog,
                                      const EmbeddingProvider& provider) const {
  check_catalog(catalog);
  if (provider.id() != provider_id_)
    throw Error(ErrorCode::index_mismatch,
                "index provider " + provider_id_ + " differs from query provider " + provider.id());
  if (provider.dim() != dim_)
    throw Error(ErrorCode::index_mismatch, "provider dimension differs from index dimension");
}

EmbeddingIndex build_index(const Catalog& catalog, const EmbeddingProvider& provider,
                           const IndexBuildOptions& options) {
  struct Item {
    std::string path;
    const std::string* text;
  };
  std::vector<Item> items;
  items.reserve(2 * catalog.server_count() + catalog.tool_count());
  for (std::size_t i = 0; i < catalog.server_count(); ++i) {
    const auto& s = catalog.server(i);
    items.push_back({server_path(i) + ".server_description", &s.description});
    items.push_back({server_path(i) + ".server_summary", &s.summary});
    for (std::size_t j = 0; j < s.tools.size(); ++j)
      items.push_back({tool_path(i, j), &s.tools[j].description});
  }
  for (const auto& item : items) {
    if (detail::trim(*item.text).empty())
      throw Error(ErrorCode::empty_text, "text is empty", item.path);
  }

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t parallel = std::max<std::size_t>(1, options.parallelism);
  std::vector<std::vector<double>> vectors(items.size());

  auto run_batch = [&](std::size_t begin) {
    const std::size_t end = std::min(items.size(), begin + batch);
    std::vector<std::string> texts;
    texts.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) texts.push_back(*items[k].text);
    std::vector<std::vector<double>> raw;
    try {
      raw = provider.embed_raw(texts);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), items[begin].path);
    }
    if (raw.size() != texts.size())
      throw Error(ErrorCode::provider_failure, "provider returned the wrong number of vectors",
                  items[begin].path);
    for (std::size_t k = begin; k < end; ++k) {
      auto& v = raw[k - begin];
      if (v.size() != provider.dim())
        throw Error(ErrorCode::provider_failure, "provider returned a vector of the wrong size",
                    items[k].path);
      normalize(v, items[k].path);
      vectors[k] = std::move(v);
    }
  };

  std::vector<std::size_t> starts;
  for (std::size_t b = 0; b < items.size(); b += batch) starts.push_back(b);
  for (std::size_t w = 0; w < starts.size(); w += parallel) {
    std::vector<std::future<void>> inflight;
    for (std::size_t t = w; t < std::min(starts.size(), w + parallel); ++t)
      inflight.push_back(std::async(parallel > 1 ? std::launch::async : std::launch::deferred,
                                    run_batch, starts[t]));
    for (auto& f : inflight) f.get();
  }

  std::vector<EmbeddingIndex::ServerVectors> servers(catalog.server_count());
  std::size_t k = 0;
  for (std::size_t i = 0; i < catalog.server_count(); ++i) {
    auto& sv = servers[i];
    sv.description = std::move(vectors[k++]);
    sv.summary = std::move(vectors[k++]);
    for (std::size_t j = 0; j < catalog.server(i).tools.size(); ++j)
      sv.tools.push_back(std::move(vectors[k++]));
  }
  return EmbeddingIndex::from_parts(catalog, provider.id(), provider.dim(), std::move(servers));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::string_view kIndexFormatName = "toolroute-embedding-index";

}  // namespace

std::string serialize_index(const EmbeddingIndex& index) {
  OrderedJson doc = OrderedJson::object();
  doc["format"] = kIndexFormatName;
  doc["version"] = kIndexFormatVersion;
  doc["provider_id"] = index.provider_id();
  doc["dim"] = index.dim();
  doc["catalog_fingerprint"] = index.catalog_fingerprint();
  OrderedJson entries = OrderedJson::array();
  auto add = [&](std::string path, const std::vector<double>& v) {
    entries.push_back(OrderedJson{{"path", std::move(path)}, {"vector", v}});
  };
  for (std::size_t i = 0; i < index.servers().size(); ++i) {
    const auto& sv = index.server(i);
    add(server_path(i) + ".server_description", sv.description);
    add(server_path(i) + ".server_summary", sv.summary);
    for (std::size_t j = 0; j < sv.tools.size(); ++j) add(tool_path(i, j), sv.tools[j]);
  }
  doc["entries"] = std::move(entries);
  return doc.dump() + "\n";
}

void save_index_file(const EmbeddingIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open file for writing", path);
  out << serialize_index(index);
  if (!out) throw Error(ErrorCode::io_error, "write failed", path);
}

EmbeddingIndex load_index(std::istream& in, const Catalog& catalog) {
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::malformed_document, e.what(), "byte " + std::to_string(e.byte));
  }
  try {
    if (doc.at("format").get<std::string>() != kIndexFormatName)
      throw Error(ErrorCode::malformed_document, "not an embedding index", "format");
    if (doc.at("version").get<int>() != kIndexFormatVersion)
      throw Error(ErrorCode::malformed_document, "unsupported index version", "version");
    const auto fingerprint = doc.at("catalog_fingerprint").get<std::string>();
    if (fingerprint != catalog.fingerprint())
      throw Error(ErrorCode::index_mismatch, "catalog fingerprint mismatch (index " + fingerprint +
                                                 ", catalog " + catalog.fingerprint() + ")");
    const auto dim = doc.at("dim").get<std::size_t>();
    const auto& entries = doc.at("entries");
    if (entries.size() != 2 * catalog.server_count() + catalog.tool_count())
      throw Error(ErrorCode::index_mismatch, "entry count differs from catalog", "entries");

    std::size_t k = 0;
    auto take = [&](const std::string& expected_path) {
      const auto& e = entries.at(k);
      const auto path = e.at("path").get<std::string>();
      if (path != expected_path)
        throw Error(ErrorCode::index_mismatch, "expected entry " + expected_path,
                    "entries[" + std::to_string(k) + "]");
      auto v = e.at("vector").get<std::vector<double>>();
      if (v.size() != dim)
        throw Error(ErrorCode::index_mismatch, "vector dimension differs from index dimension",
                    path);
      ++k;
      return v;
    };

    std::vector<EmbeddingIndex::ServerVectors> servers(catalog.server_count());
    for (std::size_t i = 0; i < catalog.server_count(); ++i) {
      auto& sv = servers[i];
      sv.description = take(server_path(i) + ".server_description");
      sv.summary = take(server_path(i) + ".server_summary");
      for (std::size_t j = 0; j < catalog.server(i).tools.size(); ++j)
        sv.tools.push_back(take(tool_path(i, j)));
    }
    return EmbeddingIndex::from_parts(catalog, doc.at("provider_id").get<std::string>(), dim,
                                      std::move(servers));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_document, e.what());
  }
}

EmbeddingIndex load_index_file(const std::string& path, const Catalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open index file", path);
  return load_index(in, catalog);
}

}  // namespace toolroute
