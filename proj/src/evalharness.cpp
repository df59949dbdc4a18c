#include "toolroute/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "text_util.hpp"
#include "toolroute/errors.hpp"
#include "toolroute/request_protocol.hpp"

namespace toolroute {

std::string_view to_string(QueryMode mode) {
  return mode == QueryMode::exact_description ? "exact_description" : "perturbed_description";
}

std::string_view to_string(NeedlePosition position) {
  switch (position) {
    case NeedlePosition::first: return "first";
    case NeedlePosition::middle: return "middle";
    case NeedlePosition::last: return "last";
    case NeedlePosition::random: return "random";
  }
  return "unknown";
}

QueryMode parse_query_mode(std::string_view text) {
  if (text == "exact_description" || text == "exact") return QueryMode::exact_description;
  if (text == "perturbed_description" || text == "perturbed") return QueryMode::perturbed_description;
  throw Error(ErrorCode::invalid_argument, "unknown query mode \"" + std::string(text) + "\"", "mode");
}

NeedlePosition parse_needle_position(std::string_view text) {
  for (auto p : {NeedlePosition::first, NeedlePosition::middle, NeedlePosition::last,
                 NeedlePosition::random}) {
    if (text == to_string(p)) return p;
  }
  throw Error(ErrorCode::invalid_argument, "unknown needle position \"" + std::string(text) + "\"",
              "positions");
}

void HaystackSpec::validate() const {
  if (sizes.empty()) throw Error(ErrorCode::invalid_argument, "no sizes given", "sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw Error(ErrorCode::invalid_argument, "sizes must be positive", "sizes");
    if (i > 0 && sizes[i] < sizes[i - 1])
      throw Error(ErrorCode::invalid_argument, "sizes must be non-decreasing", "sizes");
  }
  if (positions.empty())
    throw Error(ErrorCode::invalid_argument, "no needle positions given", "positions");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
    throw Error(ErrorCode::invalid_argument, "drop_fraction must be in [0, 1)", "drop_fraction");
}

namespace {

// Rejection sampling keeps draws identical across standard libraries, which
// std::uniform_int_distribution does not promise.
std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// First k entries of a seeded Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_below(rng, n - i)]);
  idx.resize(k);
  return idx;
}

std::string first_sentence(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '.' && (i + 1 == text.size() || detail::is_space(text[i + 1]))) {
      auto head = detail::trim(std::string_view(text).substr(0, i));
      if (!head.empty()) return std::string(head);
      break;
    }
  }
  return std::string(detail::trim(text));
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string perturb(const std::string& text, double fraction, std::mt19937_64& rng) {
  auto words = split_words(text);
  if (words.size() <= 1) return text;
  std::size_t drop = static_cast<std::size_t>(std::floor(static_cast<double>(words.size()) * fraction));
  drop = std::min(drop, words.size() - 1);
  auto dropped = sample_indices(rng, words.size(), drop);
  std::set<std::size_t> gone(dropped.begin(), dropped.end());
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (gone.count(i) != 0) continue;
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  return out;
}

struct Accumulator {
  std::size_t queries = 0;
  std::size_t hits_at_1 = 0;
  std::size_t hits_at_k = 0;
  double tokens_baseline = 0.0;
  double tokens_active = 0.0;
  double comparisons_active = 0.0;
  double comparisons_oracle = 0.0;

  EvalRow row(std::size_t size, std::string position) const {
    EvalRow r;
    r.size = size;
    r.position = std::move(position);
    r.queries = queries;
    if (queries > 0) {
      const double q = static_cast<double>(queries);
      r.accuracy_at_1 = static_cast<double>(hits_at_1) / q;
      r.accuracy_at_k = static_cast<double>(hits_at_k) / q;
      r.mean_tokens_baseline = tokens_baseline / q;
      r.mean_tokens_active = tokens_active / q;
      r.comparisons_active = comparisons_active / q;
      r.comparisons_oracle = comparisons_oracle / q;
    }
    return r;
  }
};

std::vector<EvalRow> run_size(const HaystackSpec& spec, std::size_t size, const Catalog& catalog,
                              const EmbeddingIndex& index, const EmbeddingProvider& provider,
                              const RoutingConfig& cfg, const Tokenizer& tokenizer) {
  std::mt19937_64 rng(derive_seed(spec.seed, size));
  const auto all = catalog.tool_refs();
  auto picked = sample_indices(rng, all.size(), size);
  std::sort(picked.begin(), picked.end());
  std::vector<ToolRef> refs;
  refs.reserve(size);
  for (auto i : picked) refs.push_back(all[i]);

  const Subcatalog sub = make_subcatalog(catalog, index, refs);
  const auto sub_refs = sub.catalog.tool_refs();
  const double baseline = static_cast<double>(baseline_injection_cost(sub.catalog, tokenizer));
  const double prompt_tokens =
      static_cast<double>(tokenizer.count(build_discovery_prompt(spec.include_icl).text()));

  std::vector<std::pair<NeedlePosition, std::size_t>> needles;
  for (auto p : spec.positions) {
    switch (p) {
      case NeedlePosition::first: needles.emplace_back(p, 0); break;
      case NeedlePosition::middle: needles.emplace_back(p, size / 2); break;
      case NeedlePosition::last: needles.emplace_back(p, size - 1); break;
      case NeedlePosition::random:
        for (std::size_t r = 0; r < spec.random_needles; ++r)
          needles.emplace_back(p, uniform_below(rng, size));
        break;
    }
  }

  Accumulator total;
  std::vector<Accumulator> per_position(spec.positions.size());
  for (const auto& [position, k] : needles) {
    const ToolRef needle = sub_refs[k];
    const auto& server = sub.catalog.server(needle.server);
    const auto& tool = sub.catalog.tool(needle);
    ToolRequest request;
    request.server_text = first_sentence(server.description);
    request.tool_text = spec.query_mode == QueryMode::exact_description
                            ? tool.description
                            : perturb(tool.description, spec.drop_fraction, rng);

    const auto embedded = embed_request(request, provider);
    const auto active = route(request, embedded, sub.index, sub.catalog, cfg);
    const auto oracle = brute_force_route(request, embedded, sub.index, sub.catalog, cfg.clamp_similarities);

    double tokens_active = prompt_tokens;
    for (const auto& c : active.candidates)
      tokens_active += static_cast<double>(
          tokenizer.count(render_tool_schema(sub.catalog.tool(c.ref), sub.catalog.server(c.ref.server))));
    const bool hit1 = !active.candidates.empty() && active.candidates.front().ref == needle;
    const bool hitk = std::any_of(active.candidates.begin(), active.candidates.end(),
                                  [&](const RankedTool& c) { return c.ref == needle; });

    const auto slot = static_cast<std::size_t>(
        std::find(spec.positions.begin(), spec.positions.end(), position) - spec.positions.begin());
    for (Accumulator* acc : {&total, &per_position[slot]}) {
      ++acc->queries;
      acc->hits_at_1 += hit1 ? 1 : 0;
      acc->hits_at_k += hitk ? 1 : 0;
      acc->tokens_baseline += baseline;
      acc->tokens_active += tokens_active;
      acc->comparisons_active += static_cast<double>(active.comparisons_made);
      acc->comparisons_oracle += static_cast<double>(oracle.comparisons_made);
    }
  }

  std::vector<EvalRow> rows;
  rows.push_back(total.row(size, "all"));
  for (std::size_t i = 0; i < spec.positions.size(); ++i)
    rows.push_back(per_position[i].row(size, std::string(to_string(spec.positions[i]))));
  return rows;
}

std::string fixed6(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << v;
  return out.str();
}

}  // namespace

Subcatalog make_subcatalog(const Catalog& catalog, const EmbeddingIndex& index,
                           const std::vector<ToolRef>& refs) {
  index.check_catalog(catalog);
  if (!std::is_sorted(refs.begin(), refs.end()) ||
      std::adjacent_find(refs.begin(), refs.end()) != refs.end())
    throw Error(ErrorCode::invalid_argument, "tool references must be sorted and unique");

  std::vector<ServerRecord> servers;
  std::vector<EmbeddingIndex::ServerVectors> vectors;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const ToolRef r = refs[k];
    if (k == 0 || refs[k - 1].server != r.server) {
      const auto& src = catalog.server(r.server);
      ServerRecord s{src.name, src.description, src.summary, {}, src.extra};
      servers.push_back(std::move(s));
      const auto& sv = index.server(r.server);
      vectors.push_back({sv.description, sv.summary, {}});
    }
    servers.back().tools.push_back(catalog.tool(r));
    vectors.back().tools.push_back(index.server(r.server).tools.at(r.tool));
  }
  Catalog sub = Catalog::create(std::move(servers), catalog.source_tag());
  EmbeddingIndex sub_index =
      EmbeddingIndex::from_parts(sub, index.provider_id(), index.dim(), std::move(vectors));
  return {std::move(sub), std::move(sub_index), refs};
}

std::size_t baseline_injection_cost(const Catalog& catalog, const Tokenizer& tokenizer) {
  std::size_t total = 0;
  for (const auto& s : catalog.servers())
    for (const auto& t : s.tools) total += tokenizer.count(render_tool_schema(t, s));
  return total;
}

EvalReport run_haystack(const HaystackSpec& spec, const Catalog& catalog, const EmbeddingIndex& index,
                        const EmbeddingProvider& provider, const RoutingConfig& cfg,
                        const Tokenizer& tokenizer) {
  spec.validate();
  cfg.validate();
  index.check_compatible(catalog, provider);
  for (auto s : spec.sizes) {
    if (s > catalog.tool_count())
      throw Error(ErrorCode::size_exceeds_catalog,
                  "size " + std::to_string(s) + " exceeds the catalog's " +
                      std::to_string(catalog.tool_count()) + " tools",
                  "sizes");
  }

  const std::size_t parallel = std::max<std::size_t>(1, spec.parallelism);
  std::vector<std::vector<EvalRow>> per_size(spec.sizes.size());
  for (std::size_t w = 0; w < spec.sizes.size(); w += parallel) {
    std::vector<std::future<std::vector<EvalRow>>> inflight;
    const std::size_t end = std::min(spec.sizes.size(), w + parallel);
    for (std::size_t i = w; i < end; ++i) {
      inflight.push_back(std::async(parallel > 1 ? std::launch::async : std::launch::deferred,
                                    run_size, std::cref(spec), spec.sizes[i], std::cref(catalog),
                                    std::cref(index), std::cref(provider), std::cref(cfg),
                                    std::cref(tokenizer)));
    }
    for (std::size_t i = w; i < end; ++i) per_size[i] = inflight[i - w].get();
  }

  EvalReport report;
  for (auto& rows : per_size)
    for (auto& r : rows) report.rows.push_back(std::move(r));
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization

std::string emit_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::string out;
    for (std::size_t i = 0; i < std::size(kReportColumns); ++i) {
      if (i > 0) out += ',';
      out += kReportColumns[i];
    }
    out += '\n';
    for (const auto& r : report.rows) {
      out += std::to_string(r.size) + ',' + r.position + ',' + std::to_string(r.queries) + ',' +
             fixed6(r.accuracy_at_1) + ',' + fixed6(r.accuracy_at_k) + ',' +
             fixed6(r.mean_tokens_baseline) + ',' + fixed6(r.mean_tokens_active) + ',' +
             fixed6(r.comparisons_active) + ',' + fixed6(r.comparisons_oracle) + '\n';
    }
    return out;
  }

  OrderedJson doc = OrderedJson::object();
  doc["schema_version"] = 1;
  doc["columns"] = kReportColumns;
  OrderedJson rows = OrderedJson::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"size", r.size},
                    {"position", r.position},
                    {"queries", r.queries},
                    {"accuracy_at_1", r.accuracy_at_1},
                    {"accuracy_at_k", r.accuracy_at_k},
                    {"mean_tokens_baseline", r.mean_tokens_baseline},
                    {"mean_tokens_active", r.mean_tokens_active},
                    {"comparisons_active", r.comparisons_active},
                    {"comparisons_oracle", r.comparisons_oracle}});
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

EvalReport parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::malformed_document, "missing header", "report");
  std::string expected;
  for (std::size_t i = 0; i < std::size(kReportColumns); ++i) {
    if (i > 0) expected += ',';
    expected += kReportColumns[i];
  }
  if (line != expected) throw Error(ErrorCode::malformed_document, "unexpected header", "report");

  EvalReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != std::size(kReportColumns))
      throw Error(ErrorCode::malformed_document, "wrong column count", "report");
    try {
      EvalRow r;
      r.size = std::stoul(cells[0]);
      r.position = cells[1];
      r.queries = std::stoul(cells[2]);
      r.accuracy_at_1 = std::stod(cells[3]);
      r.accuracy_at_k = std::stod(cells[4]);
      r.mean_tokens_baseline = std::stod(cells[5]);
      r.mean_tokens_active = std::stod(cells[6]);
      r.comparisons_active = std::stod(cells[7]);
      r.comparisons_oracle = std::stod(cells[8]);
      report.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::malformed_document, "bad number in row: " + line, "report");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

class WordSource {
 public:
  WordSource(std::mt19937_64& rng, std::size_t vocab_size, std::size_t word_length) : rng_(rng) {
    std::unordered_set<std::string> seen;
    while (vocab_.size() < vocab_size) {
      std::string w(word_length, 'a');
      for (auto& c : w) c = static_cast<char>('a' + uniform_below(rng_, 26));
      if (seen.insert(w).second) vocab_.push_back(std::move(w));
    }
  }

  std::string phrase(std::size_t words) {
    std::string out;
    for (std::size_t i = 0; i < words; ++i) {
      if (i > 0) out += ' ';
      out += vocab_[uniform_below(rng_, vocab_.size())];
    }
    return out;
  }

  // A phrase whose word multiset has not been produced before.
  std::string distinct_phrase(std::size_t words, std::set<std::vector<std::string>>& used) {
    for (;;) {
      auto p = phrase(words);
      auto bag = split_words(p);
      std::sort(bag.begin(), bag.end());
      if (used.insert(std::move(bag)).second) return p;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::vector<std::string> vocab_;
};

std::string padded(std::size_t value, int width) {
  std::ostringstream out;
  out << std::setw(width) << std::setfill('0') << value;
  return out.str();
}

}  // namespace

Catalog synthetic_catalog(const SyntheticCorpusSpec& spec) {
  if (spec.servers == 0 || spec.tools < spec.servers)
    throw Error(ErrorCode::invalid_argument, "need at least one tool per server", "tools");
  if (spec.description_words == 0 || spec.word_length == 0)
    throw Error(ErrorCode::invalid_argument, "description shape must be positive");

  std::mt19937_64 rng(derive_seed(spec.seed, 0x5eed));
  WordSource words(rng, 4096, spec.word_length);
  std::set<std::vector<std::string>> used_server, used_tool;

  const int server_width = static_cast<int>(std::to_string(spec.servers).size());
  const int tool_width = static_cast<int>(std::to_string(spec.tools).size());
  const std::size_t base = spec.tools / spec.servers;
  const std::size_t extra = spec.tools % spec.servers;

  std::vector<ServerRecord> servers;
  servers.reserve(spec.servers);
  std::size_t tool_id = 0;
  for (std::size_t i = 0; i < spec.servers; ++i) {
    ServerRecord s;
    s.name = "server-" + padded(i, server_width);
    s.description = words.distinct_phrase(6, used_server) + ".";
    s.summary = words.phrase(14) + ".";
    const std::size_t n = base + (i < extra ? 1 : 0);
    for (std::size_t j = 0; j < n; ++j, ++tool_id) {
      ToolRecord t;
      t.name = "tool-" + padded(tool_id, tool_width);
      t.description = words.distinct_phrase(spec.description_words, used_tool);
      t.parameters.push_back(parse_parameter("target", "(string) " + words.phrase(3)));
      t.parameters.push_back(parse_parameter("limit", "(Optional, integer) " + words.phrase(3)));
      s.tools.push_back(std::move(t));
    }
    servers.push_back(std::move(s));
  }
  return Catalog::create(std::move(servers),
                         "synthetic:" + std::to_string(spec.servers) + "x" +
                             std::to_string(spec.tools) + ":seed=" + std::to_string(spec.seed));
}

}  // namespace toolroute
