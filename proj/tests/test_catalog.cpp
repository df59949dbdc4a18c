#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "support.hpp"
#include "toolroute/catalog.hpp"
#include "toolroute/errors.hpp"

using namespace toolroute;

namespace {

const char* kFsDoc = R"([{"server_name":"fs","server_description":"Filesystem access",
  "server_summary":"Read/write local files and list directories.",
  "tools":[{"name":"read_file","description":"Read a file","parameter":{"path":"(string) file path"}}]}])";

Error load_error(const std::string& text) {
  try {
    load_catalog_text(text);
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected an error");
  return Error(ErrorCode::invalid_argument, "unreachable");
}

Catalog with_tool_counts(std::initializer_list<std::size_t> counts) {
  std::vector<ServerRecord> servers;
  std::size_t i = 0;
  for (auto n : counts) {
    ServerRecord s{"s" + std::to_string(i), "desc", "summary", {}, OrderedJson::object()};
    for (std::size_t j = 0; j < n; ++j)
      s.tools.push_back({"t" + std::to_string(j), "does things", {}, true, OrderedJson::object()});
    servers.push_back(std::move(s));
    ++i;
  }
  return Catalog::create(std::move(servers));
}

}  // namespace

TEST_CASE("minimal server document loads") {
  const auto c = load_catalog_text(kFsDoc);
  CHECK(c.server_count() == 1);
  CHECK(c.tool_count() == 1);
  const auto& tool = c.tool({0, 0});
  CHECK(tool.name == "read_file");
  REQUIRE(tool.parameters.size() == 1);
  CHECK(tool.parameters[0].name == "path");
  CHECK(tool.parameters[0].type_tag == "string");
  CHECK(tool.parameters[0].description == "file path");
  CHECK_FALSE(tool.parameters[0].optional);
}

TEST_CASE("empty tool list is a schema violation at the tools path") {
  const auto e = load_error(R"([{"server_name":"fs","server_description":"d","server_summary":"s","tools":[]}])");
  CHECK(e.code() == ErrorCode::schema_violation);
  CHECK(e.path() == "servers[0].tools");
}

TEST_CASE("structural errors name their path") {
  SUBCASE("missing description") {
    const auto e = load_error(R"([{"server_name":"a","server_summary":"s","tools":[{"name":"t","description":"d"}]}])");
    CHECK(e.code() == ErrorCode::schema_violation);
    CHECK(e.path() == "servers[0].server_description");
  }
  SUBCASE("non-string parameter") {
    const auto e = load_error(
        R"([{"server_name":"a","server_description":"d","server_summary":"s","tools":[{"name":"t","description":"d","parameter":{"p":3}}]}])");
    CHECK(e.path() == "servers[0].tools[0].parameter.p");
  }
  SUBCASE("duplicate tool name") {
    const auto e = load_error(
        R"([{"server_name":"a","server_description":"d","server_summary":"s","tools":[{"name":"t","description":"d"},{"name":"t","description":"e"}]}])");
    CHECK(e.code() == ErrorCode::schema_violation);
    CHECK(e.path() == "servers[0].tools[1].name");
  }
  SUBCASE("duplicate server name") {
    const auto e = load_error(
        R"([{"server_name":"a","server_description":"d","server_summary":"s","tools":[{"name":"t","description":"d"}]},
            {"server_name":"a","server_description":"d","server_summary":"s","tools":[{"name":"t","description":"d"}]}])");
    CHECK(e.path() == "servers[1].server_name");
  }
  SUBCASE("top level must be an array") {
    CHECK(load_error(R"({"servers":[]})").code() == ErrorCode::schema_violation);
  }
}

TEST_CASE("duplicate JSON keys are rejected") {
  const auto e = load_error(
      R"([{"server_name":"a","server_name":"b","server_description":"d","server_summary":"s","tools":[{"name":"t","description":"d"}]}])");
  CHECK(e.code() == ErrorCode::schema_violation);
}

TEST_CASE("syntax errors are malformed documents") {
  const auto e = load_error("[{\"server_name\": ");
  CHECK(e.code() == ErrorCode::malformed_document);
}

TEST_CASE("missing file reports the path") {
  try {
    load_catalog_file("/nonexistent/catalog.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io_error);
    CHECK(std::string(e.what()).find("/nonexistent/catalog.json") != std::string::npos);
  }
}

TEST_CASE("parameter text parsing") {
  auto p = parse_parameter("limit", "(Optional, integer) max results");
  CHECK(p.optional);
  CHECK(p.type_tag == "integer");
  CHECK(p.description == "max results");
  CHECK(p.raw == "(Optional, integer) max results");

  p = parse_parameter("q", "(string) query");
  CHECK_FALSE(p.optional);
  CHECK(p.type_tag == "string");

  p = parse_parameter("x", "free text without a type");
  CHECK(p.type_tag.empty());
  CHECK(p.description == "free text without a type");

  p = parse_parameter("y", "(optional) anything");
  CHECK(p.optional);
  CHECK(p.type_tag.empty());

  CHECK(has_optional_marker("Optional: blah"));
  CHECK_FALSE(has_optional_marker("(optionality) nope"));
  CHECK_FALSE(has_optional_marker("(string) Optional later"));
}

TEST_CASE("serialization round-trips, including unknown fields") {
  const std::string doc =
      R"([{"server_name":"a","server_description":"d","server_summary":"s","homepage":"x",
           "tools":[{"name":"t","description":"d","parameter":{"p":"(Optional, string) p"},"meta":{"k":[1,2]}},
                    {"name":"u","description":"no params"}]}])";
  const auto c = load_catalog_text(doc);
  CHECK_FALSE(c.tool({0, 1}).has_parameter_field);
  const auto again = load_catalog_text(serialize(c));
  CHECK(again == c);
  CHECK(again.fingerprint() == c.fingerprint());
  CHECK(serialize(again) == serialize(c));
  CHECK(again.server(0).extra.at("homepage") == "x");
  CHECK(again.tool({0, 0}).extra.at("meta").at("k").size() == 2);

  const auto pretty = load_catalog_text(serialize(c, 2));
  CHECK(pretty == c);
}

TEST_CASE("random catalogs round-trip through files") {
  testsupport::Gen g(7);
  const auto dir = std::filesystem::temp_directory_path();
  for (int i = 0; i < 20; ++i) {
    const auto c = testsupport::random_catalog(g, 6, 5);
    const auto path = (dir / ("toolroute_rt_" + std::to_string(i) + ".json")).string();
    save_catalog_file(c, path);
    const auto loaded = load_catalog_file(path);
    CHECK(loaded == c);
    std::filesystem::remove(path);
  }
}

TEST_CASE("fingerprint tracks content") {
  const auto a = load_catalog_text(kFsDoc);
  std::string changed = kFsDoc;
  changed.replace(changed.find("Read a file"), 11, "Read a FILE");
  const auto b = load_catalog_text(changed);
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(a.fingerprint().size() == 64);
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("statistics on small catalogs") {
  SUBCASE("two servers with 3 and 5 tools") {
    const auto s = catalog_stats(with_tool_counts({3, 5}));
    CHECK(s.tools_per_server.mean == doctest::Approx(4.0));
    CHECK(s.tools_per_server.median == doctest::Approx(4.0));
    CHECK(s.tools_per_server.stddev == doctest::Approx(1.0));
    CHECK(s.servers_with_at_most_5_tools == 2);
  }
  SUBCASE("single server with one tool") {
    const auto s = catalog_stats(with_tool_counts({1}));
    CHECK(s.tools_per_server.mean == 1.0);
    CHECK(s.tools_per_server.stddev == 0.0);
    CHECK(s.tools_per_server.median == 1.0);
  }
  SUBCASE("odd count median and the five-tool threshold") {
    const auto s = catalog_stats(with_tool_counts({6, 1, 5, 9, 2}));
    CHECK(s.tools_per_server.median == 5.0);
    CHECK(s.servers_with_at_most_5_tools == 3);
    CHECK(s.tools_per_server.max == 9);
    CHECK(s.tools_per_server.min == 1);
    CHECK(s.tool_count == 23);
  }
}

TEST_CASE("statistics agree with a direct computation on random catalogs") {
  testsupport::Gen g(11);
  for (int round = 0; round < 50; ++round) {
    const auto c = testsupport::random_catalog(g, 12, 14);
    std::vector<double> counts;
    for (const auto& s : c.servers()) counts.push_back(static_cast<double>(s.tools.size()));
    double sum = 0;
    for (double x : counts) sum += x;
    const double mean = sum / counts.size();
    double ss = 0;
    for (double x : counts) ss += (x - mean) * (x - mean);
    std::sort(counts.begin(), counts.end());
    const auto n = counts.size();
    const double median = n % 2 ? counts[n / 2] : (counts[n / 2 - 1] + counts[n / 2]) / 2;
    const auto small = std::count_if(counts.begin(), counts.end(), [](double x) { return x <= 5; });

    const auto s = catalog_stats(c);
    CHECK(s.tools_per_server.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.tools_per_server.stddev == doctest::Approx(std::sqrt(ss / n)).epsilon(1e-12));
    CHECK(s.tools_per_server.median == median);
    CHECK(s.servers_with_at_most_5_tools == static_cast<std::size_t>(small));
  }
}

TEST_CASE("schema rendering") {
  const auto c = load_catalog_text(kFsDoc);
  const auto text = render_tool_schema(c.tool({0, 0}), c.server(0));
  CHECK(text.find("read_file") != std::string::npos);
  CHECK(text.find("(string) file path") != std::string::npos);
  CHECK(text.find("\"required\":[\"path\"]") != std::string::npos);
  CHECK(text == render_tool_schema(c.tool({0, 0}), c.server(0)));

  const auto opt = load_catalog_text(
      R"([{"server_name":"gh","server_description":"d","server_summary":"s",
           "tools":[{"name":"search","description":"Search","parameter":{"q":"(string) query","page":"(Optional, integer) page"}}]}])");
  const auto t2 = render_tool_schema(opt.tool({0, 0}), opt.server(0));
  CHECK(t2.find("\"required\":[\"q\"]") != std::string::npos);
  CHECK(t2.find("\"page\"") != std::string::npos);
}
