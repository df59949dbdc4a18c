#include "toolroute/catalog.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "toolroute/errors.hpp"
#include "text_util.hpp"

namespace toolroute {

namespace {

constexpr std::string_view kServerName = "server_name";
constexpr std::string_view kServerDescription = "server_description";
constexpr std::string_view kServerSummary = "server_summary";
constexpr std::string_view kTools = "tools";
constexpr std::string_view kToolName = "name";
constexpr std::string_view kToolDescription = "description";
constexpr std::string_view kToolParameter = "parameter";

bool iequals_prefix(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

// "Optional" followed by end of text or a non-alphanumeric byte.
bool starts_with_optional_word(std::string_view text) {
  constexpr std::string_view kMarker = "optional";
  if (!iequals_prefix(text, kMarker)) return false;
  return text.size() == kMarker.size() ||
         !std::isalnum(static_cast<unsigned char>(text[kMarker.size()]));
}

}  // namespace

bool has_optional_marker(std::string_view raw) {
  std::string_view t = detail::trim(raw);
  if (!t.empty() && t.front() == '(') t = detail::trim(t.substr(1));
  return starts_with_optional_word(t);
}

ParameterSpec parse_parameter(std::string name, std::string raw) {
  ParameterSpec spec;
  spec.name = std::move(name);
  spec.optional = has_optional_marker(raw);

  std::string_view t = detail::trim(raw);
  std::size_t close = std::string_view::npos;
  if (!t.empty() && t.front() == '(') close = t.find(')');

  if (close != std::string_view::npos) {
    std::string_view inner = detail::trim(t.substr(1, close - 1));
    if (starts_with_optional_word(inner)) {
      inner = inner.substr(std::string_view("optional").size());
      inner = detail::trim(inner);
      if (!inner.empty() && inner.front() == ',') inner = detail::trim(inner.substr(1));
    }
    spec.type_tag = std::string(inner);
    spec.description = std::string(detail::trim(t.substr(close + 1)));
  } else {
    spec.description = std::string(t);
  }
  spec.raw = std::move(raw);
  return spec;
}

// ---------------------------------------------------------------------------
// Catalog

Catalog Catalog::create(std::vector<ServerRecord> servers, std::string source_tag) {
  std::unordered_set<std::string> server_names;
  std::size_t tools = 0;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    const auto& s = servers[i];
    const std::string base = "servers[" + std::to_string(i) + "]";
    if (detail::trim(s.name).empty())
      throw Error(ErrorCode::schema_violation, "server name is empty", base + ".server_name");
    if (!server_names.insert(s.name).second)
      throw Error(ErrorCode::schema_violation, "duplicate server name \"" + s.name + "\"",
                  base + ".server_name");
    if (detail::trim(s.description).empty())
      throw Error(ErrorCode::schema_violation, "server description is empty",
                  base + ".server_description");
    if (detail::trim(s.summary).empty())
      throw Error(ErrorCode::schema_violation, "server summary is empty", base + ".server_summary");
    if (s.tools.empty())
      throw Error(ErrorCode::schema_violation, "server has no tools", base + ".tools");

    std::unordered_set<std::string> tool_names;
    for (std::size_t j = 0; j < s.tools.size(); ++j) {
      const auto& t = s.tools[j];
      const std::string tbase = base + ".tools[" + std::to_string(j) + "]";
      if (detail::trim(t.name).empty())
        throw Error(ErrorCode::schema_violation, "tool name is empty", tbase + ".name");
      if (!tool_names.insert(t.name).second)
        throw Error(ErrorCode::schema_violation, "duplicate tool name \"" + t.name + "\"",
                    tbase + ".name");
      if (detail::trim(t.description).empty())
        throw Error(ErrorCode::schema_violation, "tool description is empty",
                    tbase + ".description");
      std::unordered_set<std::string> param_names;
      for (const auto& p : t.parameters) {
        if (p.name.empty())
          throw Error(ErrorCode::schema_violation, "parameter name is empty", tbase + ".parameter");
        if (!param_names.insert(p.name).second)
          throw Error(ErrorCode::schema_violation, "duplicate parameter \"" + p.name + "\"",
                      tbase + ".parameter." + p.name);
      }
    }
    tools += s.tools.size();
  }

  Catalog c;
  c.servers_ = std::move(servers);
  c.source_tag_ = std::move(source_tag);
  c.tool_count_ = tools;
  c.fingerprint_ = sha256_hex(serialize(c));
  return c;
}

std::vector<ToolRef> Catalog::tool_refs() const {
  std::vector<ToolRef> refs;
  refs.reserve(tool_count_);
  for (std::size_t i = 0; i < servers_.size(); ++i)
    for (std::size_t j = 0; j < servers_[i].tools.size(); ++j) refs.push_back({i, j});
  return refs;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

const std::string& require_string(const OrderedJson& obj, std::string_view key,
                                  const std::string& base) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(ErrorCode::schema_violation, "missing field", base + "." + std::string(key));
  if (!it->is_string())
    throw Error(ErrorCode::schema_violation, "expected a string", base + "." + std::string(key));
  return it->get_ref<const std::string&>();
}

OrderedJson extra_fields(const OrderedJson& obj, std::initializer_list<std::string_view> known) {
  OrderedJson extra = OrderedJson::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) extra[it.key()] = it.value();
  }
  return extra;
}

ToolRecord parse_tool(const OrderedJson& obj, const std::string& base) {
  if (!obj.is_object()) throw Error(ErrorCode::schema_violation, "expected an object", base);
  ToolRecord tool;
  tool.name = require_string(obj, kToolName, base);
  tool.description = require_string(obj, kToolDescription, base);
  auto params = obj.find(kToolParameter);
  tool.has_parameter_field = params != obj.end();
  if (tool.has_parameter_field) {
    const std::string pbase = base + ".parameter";
    if (!params->is_object())
      throw Error(ErrorCode::schema_violation, "expected an object", pbase);
    for (auto it = params->begin(); it != params->end(); ++it) {
      if (!it->is_string())
        throw Error(ErrorCode::schema_violation, "expected a string", pbase + "." + it.key());
      tool.parameters.push_back(parse_parameter(it.key(), it->get<std::string>()));
    }
  }
  tool.extra = extra_fields(obj, {kToolName, kToolDescription, kToolParameter});
  return tool;
}

ServerRecord parse_server(const OrderedJson& obj, const std::string& base) {
  if (!obj.is_object()) throw Error(ErrorCode::schema_violation, "expected an object", base);
  ServerRecord server;
  server.name = require_string(obj, kServerName, base);
  server.description = require_string(obj, kServerDescription, base);
  server.summary = require_string(obj, kServerSummary, base);
  auto tools = obj.find(kTools);
  if (tools == obj.end()) throw Error(ErrorCode::schema_violation, "missing field", base + ".tools");
  if (!tools->is_array())
    throw Error(ErrorCode::schema_violation, "expected an array", base + ".tools");
  for (std::size_t j = 0; j < tools->size(); ++j)
    server.tools.push_back(parse_tool((*tools)[j], base + ".tools[" + std::to_string(j) + "]"));
  server.extra = extra_fields(obj, {kServerName, kServerDescription, kServerSummary, kTools});
  return server;
}

// JSON permits duplicate object keys; the parser would silently keep one.
// Detect them while parsing so they surface as schema violations.
struct DuplicateKeyProbe {
  std::vector<std::set<std::string>> open_objects;
  std::vector<std::string> keys;
  std::string duplicate;
  std::string where;

  bool operator()(int /*depth*/, nlohmann::detail::parse_event_t event, OrderedJson& parsed) {
    using E = nlohmann::detail::parse_event_t;
    switch (event) {
      case E::object_start:
        open_objects.emplace_back();
        break;
      case E::object_end:
        if (!open_objects.empty()) open_objects.pop_back();
        break;
      case E::key: {
        const auto& key = parsed.get_ref<const std::string&>();
        if (!open_objects.empty() && !open_objects.back().insert(key).second && duplicate.empty()) {
          duplicate = key;
        }
        break;
      }
      default:
        break;
    }
    return true;
  }
};

}  // namespace

Catalog load_catalog_text(std::string_view text, std::string source_tag) {
  DuplicateKeyProbe probe;
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(text.begin(), text.end(), std::ref(probe));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::malformed_document,
                e.what(), "byte " + std::to_string(e.byte));
  }
  if (!probe.duplicate.empty())
    throw Error(ErrorCode::schema_violation, "duplicate key \"" + probe.duplicate + "\"",
                "servers");
  if (!doc.is_array())
    throw Error(ErrorCode::schema_violation, "document must be an array of server objects",
                "servers");

  std::vector<ServerRecord> servers;
  servers.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i)
    servers.push_back(parse_server(doc[i], "servers[" + std::to_string(i) + "]"));
  return Catalog::create(std::move(servers), std::move(source_tag));
}

Catalog load_catalog(std::istream& source, CatalogFormat /*format*/, std::string source_tag) {
  std::ostringstream buffer;
  buffer << source.rdbuf();
  return load_catalog_text(buffer.str(), std::move(source_tag));
}

Catalog load_catalog_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open catalog file", path);
  return load_catalog(in, CatalogFormat::mcp_tools_schema, path);
}

// ---------------------------------------------------------------------------
// Serialization

OrderedJson to_json(const Catalog& catalog) {
  OrderedJson doc = OrderedJson::array();
  for (const auto& s : catalog.servers()) {
    OrderedJson so = OrderedJson::object();
    so[kServerName] = s.name;
    so[kServerDescription] = s.description;
    so[kServerSummary] = s.summary;
    OrderedJson tools = OrderedJson::array();
    for (const auto& t : s.tools) {
      OrderedJson to = OrderedJson::object();
      to[kToolName] = t.name;
      to[kToolDescription] = t.description;
      if (t.has_parameter_field) {
        OrderedJson params = OrderedJson::object();
        for (const auto& p : t.parameters) params[p.name] = p.raw;
        to[kToolParameter] = std::move(params);
      }
      for (auto it = t.extra.begin(); it != t.extra.end(); ++it) to[it.key()] = it.value();
      tools.push_back(std::move(to));
    }
    so[kTools] = std::move(tools);
    for (auto it = s.extra.begin(); it != s.extra.end(); ++it) so[it.key()] = it.value();
    doc.push_back(std::move(so));
  }
  return doc;
}

std::string serialize(const Catalog& catalog, int indent) { return to_json(catalog).dump(indent); }

void save_catalog_file(const Catalog& catalog, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot open file for writing", path);
  out << serialize(catalog, 2) << '\n';
  if (!out) throw Error(ErrorCode::io_error, "write failed", path);
}

// ---------------------------------------------------------------------------
// Statistics

CatalogStats catalog_stats(const Catalog& catalog) {
  CatalogStats stats;
  stats.server_count = catalog.server_count();
  stats.tool_count = catalog.tool_count();
  if (stats.server_count == 0) return stats;

  std::vector<std::size_t> counts;
  counts.reserve(stats.server_count);
  for (const auto& s : catalog.servers()) counts.push_back(s.tools.size());
  std::sort(counts.begin(), counts.end());

  const double n = static_cast<double>(counts.size());
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c);
  const double mean = sum / n;
  double sq = 0.0;
  for (auto c : counts) sq += (static_cast<double>(c) - mean) * (static_cast<double>(c) - mean);

  auto& tps = stats.tools_per_server;
  tps.mean = mean;
  tps.stddev = std::sqrt(sq / n);
  tps.min = counts.front();
  tps.max = counts.back();
  const std::size_t mid = counts.size() / 2;
  tps.median = counts.size() % 2 == 1
                   ? static_cast<double>(counts[mid])
                   : (static_cast<double>(counts[mid - 1]) + static_cast<double>(counts[mid])) / 2.0;
  stats.servers_with_at_most_5_tools = static_cast<std::size_t>(
      std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c <= 5; }));
  return stats;
}

OrderedJson to_json(const CatalogStats& stats) {
  OrderedJson j = OrderedJson::object();
  j["server_count"] = stats.server_count;
  j["tool_count"] = stats.tool_count;
  j["tools_per_server"] = {{"mean", stats.tools_per_server.mean},
                           {"median", stats.tools_per_server.median},
                           {"stddev", stats.tools_per_server.stddev},
                           {"max", stats.tools_per_server.max},
                           {"min", stats.tools_per_server.min}};
  j["servers_with_at_most_5_tools"] = stats.servers_with_at_most_5_tools;
  return j;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_tool_schema(const ToolRecord& tool, const ServerRecord& server) {
  OrderedJson properties = OrderedJson::object();
  OrderedJson required = OrderedJson::array();
  for (const auto& p : tool.parameters) {
    OrderedJson prop = OrderedJson::object();
    prop["description"] = p.raw;
    if (!p.type_tag.empty()) prop["type"] = p.type_tag;
    properties[p.name] = std::move(prop);
    if (!p.optional) required.push_back(p.name);
  }
  OrderedJson schema = OrderedJson::object();
  schema["description"] = tool.description;
  schema["name"] = tool.name;
  schema["server"] = server.name;
  schema["parameters"] = {{"properties", std::move(properties)},
                          {"required", std::move(required)},
                          {"type", "object"}};
  return "<function>" + schema.dump() + "</function>";
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::invalid_argument, "SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace toolroute
