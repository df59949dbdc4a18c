#include <doctest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "toolroute/errors.hpp"
#include "toolroute/evalharness.hpp"

using namespace toolroute;

namespace {

struct Corpus {
  Catalog catalog;
  HashingEmbeddingProvider provider;
  EmbeddingIndex index;

  Corpus(std::size_t servers, std::size_t tools, std::uint64_t seed = 0)
      : catalog(synthetic_catalog({servers, tools, seed})), index(build_index(catalog, provider)) {}
};

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("synthetic corpus shape") {
  const auto c = synthetic_catalog({7, 50, 3});
  CHECK(c.server_count() == 7);
  CHECK(c.tool_count() == 50);
  std::size_t lo = 100, hi = 0;
  std::set<std::string> descriptions;
  std::set<std::size_t> schema_costs;
  for (const auto& s : c.servers()) {
    lo = std::min(lo, s.tools.size());
    hi = std::max(hi, s.tools.size());
    for (const auto& t : s.tools) {
      descriptions.insert(t.description);
      schema_costs.insert(default_tokenizer().count(render_tool_schema(t, s)));
    }
  }
  CHECK(hi - lo <= 1);
  CHECK(descriptions.size() == 50);
  CHECK(schema_costs.size() == 1);
  CHECK(serialize(synthetic_catalog({7, 50, 3})) == serialize(c));
  CHECK(serialize(synthetic_catalog({7, 50, 4})) != serialize(c));
  CHECK_THROWS_AS(synthetic_catalog({5, 4, 0}), Error);
}

TEST_CASE("sub-catalogs keep order and vectors") {
  Corpus k(4, 12);
  const std::vector<ToolRef> refs{{0, 1}, {0, 2}, {2, 0}, {3, 2}};
  const auto sub = make_subcatalog(k.catalog, k.index, refs);
  CHECK(sub.catalog.server_count() == 3);
  CHECK(sub.catalog.tool_count() == 4);
  CHECK(sub.catalog.tool({1, 0}) == k.catalog.tool({2, 0}));
  CHECK(sub.index.server(2).tools[0] == k.index.server(3).tools[2]);
  CHECK(sub.index.server(1).summary == k.index.server(2).summary);
  CHECK(sub.origin == refs);
  sub.index.check_compatible(sub.catalog, k.provider);

  const std::vector<ToolRef> unsorted{{1, 0}, {0, 0}};
  CHECK_THROWS_AS(make_subcatalog(k.catalog, k.index, unsorted), Error);
}

TEST_CASE("baseline cost is the sum of rendered schemas") {
  Corpus k(3, 9);
  std::size_t expected = 0;
  for (const auto& s : k.catalog.servers())
    for (const auto& t : s.tools) expected += default_tokenizer().count(render_tool_schema(t, s));
  CHECK(baseline_injection_cost(k.catalog, default_tokenizer()) == expected);
}

TEST_CASE("exact descriptions are always found") {
  Corpus k(120, 1000, 9);
  HaystackSpec spec;
  spec.sizes = {1, 10, 100, 1000};
  spec.seed = 5;
  const auto report = run_haystack(spec, k.catalog, k.index, k.provider, {});
  REQUIRE(report.rows.size() == 4 * 5);
  double prev_baseline = 0;
  double active = -1;
  for (const auto& r : report.rows) {
    CHECK(r.accuracy_at_1 == 1.0);
    CHECK(r.accuracy_at_k == 1.0);
    if (r.position == "all") {
      CHECK(r.queries == 7);
      CHECK(r.mean_tokens_baseline > prev_baseline);
      prev_baseline = r.mean_tokens_baseline;
      if (active < 0) active = r.mean_tokens_active;
      CHECK(r.mean_tokens_active == active);
      CHECK(r.comparisons_active <= r.comparisons_oracle);
    }
  }
}

TEST_CASE("the oracle agrees on exact-description needles") {
  Corpus k(40, 300, 2);
  testsupport::Gen g(4);
  for (int i = 0; i < 30; ++i) {
    const auto refs = k.catalog.tool_refs();
    const auto needle = refs[g.below(refs.size())];
    const auto& s = k.catalog.server(needle.server);
    const std::string server_text = s.description.substr(0, s.description.find('.'));
    const ToolRequest req{server_text, k.catalog.tool(needle).description, {}};
    const auto oracle = brute_force_route(req, k.index, k.catalog, k.provider);
    CHECK(oracle.ranked.front().ref == needle);
    CHECK(oracle.ranked.front().s_tool == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("size one is trivially found in perturbed mode") {
  Corpus k(5, 20);
  HaystackSpec spec;
  spec.sizes = {1};
  spec.query_mode = QueryMode::perturbed_description;
  const auto report = run_haystack(spec, k.catalog, k.index, k.provider, {});
  for (const auto& r : report.rows) CHECK(r.accuracy_at_1 == 1.0);
}

TEST_CASE("runs are seeded and independent of parallelism") {
  Corpus k(20, 200, 1);
  HaystackSpec spec;
  spec.sizes = {5, 50, 200};
  spec.seed = 42;
  spec.query_mode = QueryMode::perturbed_description;
  const auto a = emit_report(run_haystack(spec, k.catalog, k.index, k.provider, {}), ReportFormat::csv);
  spec.parallelism = 3;
  const auto b = emit_report(run_haystack(spec, k.catalog, k.index, k.provider, {}), ReportFormat::csv);
  CHECK(a == b);
  spec.seed = 43;
  const auto c = emit_report(run_haystack(spec, k.catalog, k.index, k.provider, {}), ReportFormat::csv);
  CHECK(a != c);
}

TEST_CASE("oversized requests are rejected") {
  Corpus k(2, 10);
  HaystackSpec spec;
  spec.sizes = {11};
  try {
    run_haystack(spec, k.catalog, k.index, k.provider, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::size_exceeds_catalog);
  }
  spec.sizes = {};
  CHECK_THROWS_AS(run_haystack(spec, k.catalog, k.index, k.provider, {}), Error);
}

TEST_CASE("report serialization") {
  SUBCASE("empty report is the header") {
    const auto csv = emit_report({}, ReportFormat::csv);
    CHECK(line_count(csv) == 1);
    CHECK(csv.rfind("size,position,queries,", 0) == 0);
    CHECK(parse_report_csv(csv).rows.empty());
  }
  SUBCASE("one row round-trips") {
    EvalReport r{{{10, "first", 1, 1.0, 1.0, 1290.0, 275.0, 25.0, 30.0}}};
    CHECK(parse_report_csv(emit_report(r, ReportFormat::csv)) == r);
  }
  SUBCASE("ten rows, eleven lines") {
    EvalReport r;
    for (std::size_t i = 0; i < 10; ++i) r.rows.push_back({i + 1, "all", 7, 0.5, 0.75, 1.5, 2.25, 3.0, 4.0});
    const auto csv = emit_report(r, ReportFormat::csv);
    CHECK(line_count(csv) == 11);
    CHECK(parse_report_csv(csv) == r);
  }
  SUBCASE("structured form") {
    EvalReport r{{{1, "all", 7, 1.0, 1.0, 129.0, 275.0, 3.0, 3.0}}};
    const auto doc = nlohmann::json::parse(emit_report(r, ReportFormat::structured));
    CHECK(doc.at("schema_version") == 1);
    CHECK(doc.at("rows").size() == 1);
    CHECK(doc.at("rows")[0].at("mean_tokens_active") == 275.0);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(parse_report_csv("nope\n"), Error);
  }
}

TEST_CASE("names round-trip") {
  for (auto p : {NeedlePosition::first, NeedlePosition::middle, NeedlePosition::last, NeedlePosition::random})
    CHECK(parse_needle_position(to_string(p)) == p);
  CHECK(parse_query_mode("perturbed") == QueryMode::perturbed_description);
  CHECK_THROWS_AS(parse_query_mode("fuzzy"), Error);
}
