#pragma once

#include <cstddef>
#include <istream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace toolroute {

using OrderedJson = nlohmann::ordered_json;

/// One entry of a tool's `parameter` map. The source text has the form
/// `(type) description` or `(Optional, type) description`; `raw` keeps it
/// verbatim so serialization is lossless.
struct ParameterSpec {
  std::string name;
  std::string type_tag;
  std::string description;
  bool optional = false;
  std::string raw;

  bool operator==(const ParameterSpec&) const = default;
};

/// Parses the raw parameter text into type tag, description and optionality.
ParameterSpec parse_parameter(std::string name, std::string raw);

/// True when `raw` (after leading whitespace) starts with the `Optional`
/// marker, either bare or as the first item of the parenthesized prefix.
bool has_optional_marker(std::string_view raw);

struct ToolRecord {
  std::string name;
  std::string description;
  std::vector<ParameterSpec> parameters;
  // Whether the source object carried a `parameter` field at all.
  bool has_parameter_field = true;
  // Unknown source fields, kept for round-trip only.
  OrderedJson extra = OrderedJson::object();

  bool operator==(const ToolRecord&) const = default;
};

struct ServerRecord {
  std::string name;
  std::string description;
  std::string summary;
  std::vector<ToolRecord> tools;
  OrderedJson extra = OrderedJson::object();

  bool operator==(const ServerRecord&) const = default;
};

/// Address of one tool inside a catalog.
struct ToolRef {
  std::size_t server = 0;
  std::size_t tool = 0;

  auto operator<=>(const ToolRef&) const = default;
};

/// Validated, immutable tool catalog. Construct through `Catalog::create` or
/// `load_catalog`; there are no mutators.
class Catalog {
 public:
  /// Validates and takes ownership of `servers`. Throws Error(schema_violation)
  /// naming the offending path.
  static Catalog create(std::vector<ServerRecord> servers, std::string source_tag = {});

  const std::vector<ServerRecord>& servers() const noexcept { return servers_; }
  const ServerRecord& server(std::size_t i) const { return servers_.at(i); }
  const ToolRecord& tool(ToolRef ref) const { return servers_.at(ref.server).tools.at(ref.tool); }
  const std::string& source_tag() const noexcept { return source_tag_; }

  std::size_t server_count() const noexcept { return servers_.size(); }
  std::size_t tool_count() const noexcept { return tool_count_; }

  /// All tools in catalog order.
  std::vector<ToolRef> tool_refs() const;

  /// Hex SHA-256 of the canonical serialization. Computed once at creation.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  /// Content equality (source_tag is provenance, not content).
  bool operator==(const Catalog& other) const { return servers_ == other.servers_; }

 private:
  Catalog() = default;

  std::vector<ServerRecord> servers_;
  std::string source_tag_;
  std::size_t tool_count_ = 0;
  std::string fingerprint_;
};

enum class CatalogFormat { mcp_tools_schema };

/// Reads an MCP-tools document (a JSON array of server objects).
/// Throws Error(malformed_document) on syntax errors and
/// Error(schema_violation) on structural ones.
Catalog load_catalog(std::istream& source, CatalogFormat format = CatalogFormat::mcp_tools_schema,
                     std::string source_tag = {});
Catalog load_catalog_text(std::string_view text, std::string source_tag = {});
Catalog load_catalog_file(const std::string& path);

OrderedJson to_json(const Catalog& catalog);
/// Canonical serialization, compact. Fingerprints are computed over this.
std::string serialize(const Catalog& catalog, int indent = -1);
void save_catalog_file(const Catalog& catalog, const std::string& path);

struct ToolCountSummary {
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // population
  std::size_t max = 0;
  std::size_t min = 0;
};

struct CatalogStats {
  std::size_t server_count = 0;
  std::size_t tool_count = 0;
  ToolCountSummary tools_per_server;
  std::size_t servers_with_at_most_5_tools = 0;
};

CatalogStats catalog_stats(const Catalog& catalog);
OrderedJson to_json(const CatalogStats& stats);

/// Injectable callable-schema text for one tool. Pure: identical inputs give
/// byte-identical output.
std::string render_tool_schema(const ToolRecord& tool, const ServerRecord& server);

std::string sha256_hex(std::string_view data);

}  // namespace toolroute
