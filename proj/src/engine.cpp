#include "toolroute/engine.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "text_util.hpp"
#include "toolroute/errors.hpp"
#include "toolroute/remote_embedding.hpp"

namespace toolroute {

namespace {

std::size_t parse_size(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size() && text.find('-') == std::string::npos) return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::invalid_argument, "expected a non-negative integer, got \"" + text + "\"", where);
}

double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorCode::invalid_argument, "expected a number, got \"" + text + "\"", where);
}

bool parse_bool(const std::string& text, const std::string& where) {
  const auto t = detail::to_lower_ascii(text);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw Error(ErrorCode::invalid_argument, "expected a boolean, got \"" + text + "\"", where);
}

void apply(EngineOptions& o, const OptionOverrides& v) {
  if (v.m) o.routing.server_shortlist = *v.m;
  if (v.k) o.routing.top_k = *v.k;
  if (v.max_expanded_k) o.routing.max_expanded_k = *v.max_expanded_k;
  if (v.epsilon) o.routing.cluster_epsilon = *v.epsilon;
  if (v.clamp) o.routing.clamp_similarities = *v.clamp;
  if (v.provider) o.provider = *v.provider;
  if (v.seed) o.seed = *v.seed;
  if (v.not_found_floor) o.not_found_floor = *v.not_found_floor;
}

OptionOverrides from_env(const EnvLookup& env) {
  OptionOverrides v;
  auto get = [&](const char* name) { return env(name); };
  if (auto s = get("TOOLROUTE_M")) v.m = parse_size(*s, "TOOLROUTE_M");
  if (auto s = get("TOOLROUTE_K")) v.k = parse_size(*s, "TOOLROUTE_K");
  if (auto s = get("TOOLROUTE_MAX_EXPANDED_K"))
    v.max_expanded_k = parse_size(*s, "TOOLROUTE_MAX_EXPANDED_K");
  if (auto s = get("TOOLROUTE_EPSILON")) v.epsilon = parse_double(*s, "TOOLROUTE_EPSILON");
  if (auto s = get("TOOLROUTE_CLAMP")) v.clamp = parse_bool(*s, "TOOLROUTE_CLAMP");
  if (auto s = get("TOOLROUTE_PROVIDER")) v.provider = *s;
  if (auto s = get("TOOLROUTE_SEED")) v.seed = parse_size(*s, "TOOLROUTE_SEED");
  if (auto s = get("TOOLROUTE_NOT_FOUND_FLOOR"))
    v.not_found_floor = parse_double(*s, "TOOLROUTE_NOT_FOUND_FLOOR");
  if (auto s = get("TOOLROUTE_CONFIG")) v.config_file = *s;
  return v;
}

}  // namespace

OptionOverrides overrides_from_json(const OrderedJson& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "options must be a JSON object");
  OptionOverrides v;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& val = it.value();
      if (val.is_null()) continue;
      if (key == "m") v.m = val.get<std::size_t>();
      else if (key == "k") v.k = val.get<std::size_t>();
      else if (key == "max_expanded_k") v.max_expanded_k = val.get<std::size_t>();
      else if (key == "epsilon") v.epsilon = val.get<double>();
      else if (key == "clamp") v.clamp = val.get<bool>();
      else if (key == "provider") v.provider = val.get<std::string>();
      else if (key == "seed") v.seed = val.get<std::uint64_t>();
      else if (key == "not_found_floor") v.not_found_floor = val.get<double>();
      else if (key == "config_file") v.config_file = val.get<std::string>();
      else throw Error(ErrorCode::invalid_argument, "unknown option", key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, e.what(), "options");
  }
  return v;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') return std::string(v);
    return std::nullopt;
  };
}

EngineOptions resolve_options(const OptionOverrides& explicit_overrides, const EnvLookup& env) {
  const OptionOverrides env_overrides = from_env(env);
  const auto config_path =
      explicit_overrides.config_file ? explicit_overrides.config_file : env_overrides.config_file;

  EngineOptions o;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open config file", *config_path);
    OrderedJson doc;
    try {
      doc = OrderedJson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::malformed_document, e.what(), *config_path);
    }
    auto file = overrides_from_json(doc);
    if (file.config_file)
      throw Error(ErrorCode::invalid_argument, "config files cannot include others", *config_path);
    apply(o, file);
  }
  apply(o, env_overrides);
  apply(o, explicit_overrides);
  if (o.routing.top_k > o.routing.max_expanded_k) o.routing.max_expanded_k = o.routing.top_k;
  o.routing.validate();
  return o;
}

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& choice) {
  if (choice == "fallback" || choice == "hashing") return std::make_unique<HashingEmbeddingProvider>();
  if (choice == "openai") {
    RemoteEmbeddingConfig cfg;
    if (const char* url = std::getenv("TOOLROUTE_EMBEDDING_URL"); url != nullptr && *url != '\0')
      cfg.base_url = url;
    return std::make_unique<RemoteEmbeddingProvider>(cfg);
  }
  throw Error(ErrorCode::invalid_argument, "unknown provider \"" + choice + "\"", "provider");
}

// ---------------------------------------------------------------------------
// Messages

RetrieveRequestMessage RetrieveRequestMessage::from_json(const OrderedJson& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "request body must be a JSON object");
  RetrieveRequestMessage m;
  auto text_field = [&](const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw Error(ErrorCode::invalid_argument, "missing field", name);
    if (!it->is_string()) throw Error(ErrorCode::invalid_argument, "expected a string", name);
    auto value = it->get<std::string>();
    if (detail::trim(value).empty())
      throw Error(ErrorCode::empty_request_field, "field is empty", name);
    return value;
  };
  m.server = text_field("server");
  m.tool = text_field("tool");
  if (auto it = j.find("k"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() <= 0)
      throw Error(ErrorCode::invalid_argument, "expected a positive integer", "k");
    m.k = it->get<std::size_t>();
  }
  if (auto it = j.find("clamp"); it != j.end() && !it->is_null()) {
    if (!it->is_boolean()) throw Error(ErrorCode::invalid_argument, "expected a boolean", "clamp");
    m.clamp = it->get<bool>();
  }
  return m;
}

OrderedJson RetrieveResponseMessage::to_json() const {
  OrderedJson cands = OrderedJson::array();
  for (const auto& c : candidates) {
    cands.push_back({{"server_name", c.server_name},
                     {"tool_name", c.tool_name},
                     {"score", c.score},
                     {"s_server", c.s_server},
                     {"s_tool", c.s_tool},
                     {"schema_text", c.schema_text}});
  }
  OrderedJson j = OrderedJson::object();
  j["schema_version"] = 1;
  j["candidates"] = std::move(cands);
  j["comparisons_made"] = comparisons_made;
  return j;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(std::shared_ptr<const Catalog> catalog, std::shared_ptr<const EmbeddingIndex> index,
               std::shared_ptr<const EmbeddingProvider> provider, EngineOptions options)
    : catalog_(std::move(catalog)),
      index_(std::move(index)),
      provider_(std::move(provider)),
      options_(std::move(options)) {
  if (!catalog_ || !index_ || !provider_)
    throw Error(ErrorCode::invalid_argument, "engine needs a catalog, an index and a provider");
  options_.routing.validate();
  index_->check_compatible(*catalog_, *provider_);
}

RetrieveResponseMessage Engine::retrieve(const RetrieveRequestMessage& request) const {
  RoutingConfig cfg = options_.routing;
  if (request.k) {
    cfg.top_k = *request.k;
    cfg.max_expanded_k = std::max(cfg.max_expanded_k, *request.k);
  }
  if (request.clamp) cfg.clamp_similarities = *request.clamp;

  ToolRequest r;
  r.server_text = request.server;
  r.tool_text = request.tool;
  const auto result = route(r, *index_, *catalog_, cfg, *provider_);

  RetrieveResponseMessage out;
  out.comparisons_made = result.comparisons_made;
  for (const auto& c : result.candidates) {
    out.candidates.push_back({c.server_name, c.tool_name, c.score, c.s_server, c.s_tool,
                              render_tool_schema(catalog_->tool(c.ref), catalog_->server(c.ref.server))});
  }
  return out;
}

std::string Engine::retrieve_json(const std::string& body) const {
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_argument, std::string("request body is not JSON: ") + e.what(),
                "body");
  }
  return retrieve(RetrieveRequestMessage::from_json(doc)).to_json().dump();
}

OrderedJson Engine::health() const {
  OrderedJson j = OrderedJson::object();
  j["schema_version"] = 1;
  j["status"] = "ok";
  j["catalog_fingerprint"] = catalog_->fingerprint();
  j["servers"] = catalog_->server_count();
  j["tools"] = catalog_->tool_count();
  j["embeddings"] = index_->entry_count();
  j["provider"] = index_->provider_id();
  return j;
}

std::string Engine::format_text(const RetrieveResponseMessage& response) {
  std::ostringstream out;
  out << "rank\tserver\ttool\tscore\ts_server\ts_tool\n";
  out << std::fixed << std::setprecision(6);
  std::size_t rank = 1;
  for (const auto& c : response.candidates) {
    out << rank++ << '\t' << c.server_name << '\t' << c.tool_name << '\t' << c.score << '\t'
        << c.s_server << '\t' << c.s_tool << '\n';
  }
  out << "comparisons\t" << response.comparisons_made << '\n';
  return out.str();
}

}  // namespace toolroute
