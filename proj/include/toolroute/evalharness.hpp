#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "toolroute/catalog.hpp"
#include "toolroute/embedding.hpp"
#include "toolroute/routing.hpp"
#include "toolroute/tokenizer.hpp"

namespace toolroute {

enum class QueryMode { exact_description, perturbed_description };
enum class NeedlePosition { first, middle, last, random };

std::string_view to_string(QueryMode mode);
std::string_view to_string(NeedlePosition position);
QueryMode parse_query_mode(std::string_view text);
NeedlePosition parse_needle_position(std::string_view text);

struct HaystackSpec {
  std::vector<std::size_t> sizes;
  std::vector<NeedlePosition> positions{NeedlePosition::first, NeedlePosition::middle,
                                        NeedlePosition::last, NeedlePosition::random};
  // Needles drawn per size for NeedlePosition::random.
  std::size_t random_needles = 4;
  QueryMode query_mode = QueryMode::exact_description;
  std::uint64_t seed = 0;
  // Fraction of words dropped from the tool description in perturbed mode.
  double drop_fraction = 0.3;
  bool include_icl = false;
  // Sizes evaluated concurrently. Results do not depend on it.
  std::size_t parallelism = 1;

  void validate() const;
};

/// One report line. Rows with position "all" aggregate every needle of the
/// size; the others break the same queries down by needle position.
struct EvalRow {
  std::size_t size = 0;
  std::string position;
  std::size_t queries = 0;
  double accuracy_at_1 = 0.0;
  double accuracy_at_k = 0.0;
  double mean_tokens_baseline = 0.0;
  double mean_tokens_active = 0.0;
  double comparisons_active = 0.0;
  double comparisons_oracle = 0.0;

  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  bool operator==(const EvalReport&) const = default;
};

/// Catalog restricted to a set of tools, with the matching slice of an index.
struct Subcatalog {
  Catalog catalog;
  EmbeddingIndex index;
  // origin[k] is the source address of the k-th tool of `catalog`, in order.
  std::vector<ToolRef> origin;
};

/// `refs` must be sorted and unique. Servers keep their order; servers with no
/// selected tool are dropped.
Subcatalog make_subcatalog(const Catalog& catalog, const EmbeddingIndex& index,
                           const std::vector<ToolRef>& refs);

/// Passive-paradigm context cost: tokens of every rendered tool schema.
std::size_t baseline_injection_cost(const Catalog& catalog, const Tokenizer& tokenizer);

/// Needle-in-a-haystack run. For each size a seeded sub-catalog is drawn,
/// needles are taken at the requested positions, and each needle becomes a
/// request (server: first sentence of its server description; tool: its
/// description, perturbed or not) that is routed and scored.
/// Throws Error(size_exceeds_catalog).
EvalReport run_haystack(const HaystackSpec& spec, const Catalog& catalog, const EmbeddingIndex& index,
                        const EmbeddingProvider& provider, const RoutingConfig& cfg,
                        const Tokenizer& tokenizer = default_tokenizer());

enum class ReportFormat { csv, structured };

/// CSV: one header row, then one line per row, numbers with 6 decimals.
/// Structured: JSON {"schema_version": 1, "columns": [...], "rows": [...]}.
std::string emit_report(const EvalReport& report, ReportFormat format);
EvalReport parse_report_csv(const std::string& csv);

inline constexpr const char* kReportColumns[] = {
    "size",           "position",           "queries",
    "accuracy_at_1",  "accuracy_at_k",      "mean_tokens_baseline",
    "mean_tokens_active", "comparisons_active", "comparisons_oracle"};

/// Deterministic synthetic catalog for desk-scale experiments. Tools are
/// spread evenly over servers. Every description is a distinct bag of
/// fixed-length pseudo-words and all names are fixed-width, so every tool
/// schema renders to the same length.
struct SyntheticCorpusSpec {
  std::size_t servers = 10;
  std::size_t tools = 50;
  std::uint64_t seed = 0;
  std::size_t description_words = 8;
  std::size_t word_length = 7;
};

Catalog synthetic_catalog(const SyntheticCorpusSpec& spec);

}  // namespace toolroute
