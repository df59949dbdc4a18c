#include "toolroute/toolroute.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "toolroute/catalog.hpp"
#include "toolroute/embedding.hpp"
#include "toolroute/engine.hpp"
#include "toolroute/errors.hpp"
#include "toolroute/evalharness.hpp"
#include "toolroute/request_protocol.hpp"
#include "toolroute/service.hpp"

using namespace toolroute;

struct tr_catalog {
  std::shared_ptr<const Catalog> catalog;
};

struct tr_index {
  std::shared_ptr<const Catalog> catalog;
  std::shared_ptr<const EmbeddingIndex> index;
};

struct tr_engine {
  std::shared_ptr<const Engine> engine;
};

struct tr_service {
  std::shared_ptr<const Engine> engine;
  std::unique_ptr<Service> service;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_path;

tr_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return TR_E_INVALID_ARGUMENT;
    case ErrorCode::io_error: return TR_E_IO;
    case ErrorCode::malformed_document: return TR_E_MALFORMED_DOCUMENT;
    case ErrorCode::schema_violation: return TR_E_SCHEMA_VIOLATION;
    case ErrorCode::empty_text: return TR_E_EMPTY_TEXT;
    case ErrorCode::provider_failure: return TR_E_PROVIDER_FAILURE;
    case ErrorCode::dimension_mismatch: return TR_E_DIMENSION_MISMATCH;
    case ErrorCode::zero_vector: return TR_E_ZERO_VECTOR;
    case ErrorCode::index_mismatch: return TR_E_INDEX_MISMATCH;
    case ErrorCode::empty_request_field: return TR_E_EMPTY_REQUEST_FIELD;
    case ErrorCode::format_error: return TR_E_FORMAT;
    case ErrorCode::size_exceeds_catalog: return TR_E_SIZE_EXCEEDS_CATALOG;
  }
  return TR_E_INTERNAL;
}

tr_status fail(tr_status status, const std::string& message, const std::string& path = {}) {
  g_error = message;
  g_error_path = path;
  return status;
}

template <typename F>
tr_status guarded(F&& body) {
  g_error.clear();
  g_error_path.clear();
  try {
    body();
    return TR_OK;
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what(), e.path());
  } catch (const std::bad_alloc&) {
    return fail(TR_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TR_E_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw Error(ErrorCode::invalid_argument, "null argument", name);
}

OrderedJson parse_options(const char* json, const char* what) {
  if (json == nullptr || *json == '\0') return OrderedJson::object();
  try {
    return OrderedJson::parse(json);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_argument, e.what(), what);
  }
}

EngineOptions engine_options(const char* options_json) {
  return resolve_options(overrides_from_json(parse_options(options_json, "options")));
}

OrderedJson options_to_json(const EngineOptions& o) {
  return {{"m", o.routing.server_shortlist},
          {"k", o.routing.top_k},
          {"max_expanded_k", o.routing.max_expanded_k},
          {"epsilon", o.routing.cluster_epsilon},
          {"clamp", o.routing.clamp_similarities},
          {"provider", o.provider},
          {"seed", o.seed},
          {"not_found_floor", o.not_found_floor}};
}

HaystackSpec haystack_spec(const OrderedJson& j, std::uint64_t default_seed) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "spec must be a JSON object", "spec");
  HaystackSpec spec;
  spec.seed = default_seed;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "sizes") {
        spec.sizes = v.get<std::vector<std::size_t>>();
      } else if (key == "positions") {
        spec.positions.clear();
        for (const auto& p : v) spec.positions.push_back(parse_needle_position(p.get<std::string>()));
      } else if (key == "random_needles") {
        spec.random_needles = v.get<std::size_t>();
      } else if (key == "query_mode") {
        spec.query_mode = parse_query_mode(v.get<std::string>());
      } else if (key == "seed") {
        spec.seed = v.get<std::uint64_t>();
      } else if (key == "drop_fraction") {
        spec.drop_fraction = v.get<double>();
      } else if (key == "include_icl") {
        spec.include_icl = v.get<bool>();
      } else if (key == "parallelism") {
        spec.parallelism = v.get<std::size_t>();
      } else {
        throw Error(ErrorCode::invalid_argument, "unknown spec key", key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_argument, e.what(), "spec");
  }
  return spec;
}

std::string_view warning_kind(ParseWarningKind k) {
  switch (k) {
    case ParseWarningKind::unclosed_block: return "unclosed_block";
    case ParseWarningKind::missing_field: return "missing_field";
    case ParseWarningKind::duplicate_field: return "duplicate_field";
  }
  return "unknown";
}

}  // namespace

extern "C" {

const char* tr_version(void) { return "1.0.0"; }

const char* tr_status_name(tr_status status) {
  switch (status) {
    case TR_OK: return "Ok";
    case TR_E_INVALID_ARGUMENT: return "InvalidArgument";
    case TR_E_IO: return "IoError";
    case TR_E_MALFORMED_DOCUMENT: return "MalformedDocument";
    case TR_E_SCHEMA_VIOLATION: return "SchemaViolation";
    case TR_E_EMPTY_TEXT: return "EmptyText";
    case TR_E_PROVIDER_FAILURE: return "ProviderFailure";
    case TR_E_DIMENSION_MISMATCH: return "DimensionMismatch";
    case TR_E_ZERO_VECTOR: return "ZeroVector";
    case TR_E_INDEX_MISMATCH: return "IndexMismatch";
    case TR_E_EMPTY_REQUEST_FIELD: return "EmptyRequestField";
    case TR_E_FORMAT: return "FormatError";
    case TR_E_SIZE_EXCEEDS_CATALOG: return "SizeExceedsCatalog";
    case TR_E_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* tr_last_error(void) { return g_error.c_str(); }
const char* tr_last_error_path(void) { return g_error_path.c_str(); }
void tr_free_string(char* s) { std::free(s); }

// --- catalog ---------------------------------------------------------------

tr_status tr_catalog_load_file(const char* path, tr_catalog** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto c = std::make_shared<const Catalog>(load_catalog_file(path));
    *out = new tr_catalog{std::move(c)};
  });
}

tr_status tr_catalog_load_text(const char* json, tr_catalog** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    auto c = std::make_shared<const Catalog>(load_catalog_text(json));
    *out = new tr_catalog{std::move(c)};
  });
}

tr_status tr_catalog_synthetic(size_t servers, size_t tools, uint64_t seed, tr_catalog** out) {
  return guarded([&] {
    require(out, "out");
    SyntheticCorpusSpec spec;
    spec.servers = servers;
    spec.tools = tools;
    spec.seed = seed;
    *out = new tr_catalog{std::make_shared<const Catalog>(synthetic_catalog(spec))};
  });
}

tr_status tr_catalog_save_file(const tr_catalog* catalog, const char* path) {
  return guarded([&] {
    require(catalog, "catalog");
    require(path, "path");
    save_catalog_file(*catalog->catalog, path);
  });
}

size_t tr_catalog_server_count(const tr_catalog* catalog) {
  return catalog ? catalog->catalog->server_count() : 0;
}

size_t tr_catalog_tool_count(const tr_catalog* catalog) {
  return catalog ? catalog->catalog->tool_count() : 0;
}

tr_status tr_catalog_stats_json(const tr_catalog* catalog, char** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(out, "out");
    *out = dup_string(to_json(catalog_stats(*catalog->catalog)).dump());
  });
}

tr_status tr_catalog_fingerprint(const tr_catalog* catalog, char** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(out, "out");
    *out = dup_string(catalog->catalog->fingerprint());
  });
}

void tr_catalog_free(tr_catalog* catalog) { delete catalog; }

// --- index -----------------------------------------------------------------

tr_status tr_index_build(const tr_catalog* catalog, const char* options_json, tr_index** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(out, "out");
    const auto opts = parse_options(options_json, "options");
    if (!opts.is_object()) throw Error(ErrorCode::invalid_argument, "options must be an object", "options");
    std::string provider_name = "fallback";
    IndexBuildOptions build;
    try {
      for (auto it = opts.begin(); it != opts.end(); ++it) {
        if (it.key() == "provider") provider_name = it.value().get<std::string>();
        else if (it.key() == "batch_size") build.batch_size = it.value().get<std::size_t>();
        else if (it.key() == "parallelism") build.parallelism = it.value().get<std::size_t>();
        else throw Error(ErrorCode::invalid_argument, "unknown option", it.key());
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_argument, e.what(), "options");
    }
    auto provider = make_provider(provider_name);
    auto index = std::make_shared<const EmbeddingIndex>(build_index(*catalog->catalog, *provider, build));
    *out = new tr_index{catalog->catalog, std::move(index)};
  });
}

tr_status tr_index_load_file(const tr_catalog* catalog, const char* path, tr_index** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(path, "path");
    require(out, "out");
    auto index = std::make_shared<const EmbeddingIndex>(load_index_file(path, *catalog->catalog));
    *out = new tr_index{catalog->catalog, std::move(index)};
  });
}

tr_status tr_index_save_file(const tr_index* index, const char* path) {
  return guarded([&] {
    require(index, "index");
    require(path, "path");
    save_index_file(*index->index, path);
  });
}

size_t tr_index_entry_count(const tr_index* index) { return index ? index->index->entry_count() : 0; }

tr_status tr_index_provider_id(const tr_index* index, char** out) {
  return guarded([&] {
    require(index, "index");
    require(out, "out");
    *out = dup_string(index->index->provider_id());
  });
}

void tr_index_free(tr_index* index) { delete index; }

// --- engine ----------------------------------------------------------------

tr_status tr_engine_create(const tr_catalog* catalog, const tr_index* index, const char* options_json,
                           tr_engine** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(index, "index");
    require(out, "out");
    auto options = engine_options(options_json);
    std::shared_ptr<const EmbeddingProvider> provider = make_provider(options.provider);
    auto engine = std::make_shared<const Engine>(catalog->catalog, index->index, std::move(provider),
                                                 std::move(options));
    *out = new tr_engine{std::move(engine)};
  });
}

tr_status tr_engine_retrieve(const tr_engine* engine, const char* request_json, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    require(request_json, "request");
    require(out_json, "out");
    *out_json = dup_string(engine->engine->retrieve_json(request_json));
  });
}

tr_status tr_engine_query_text(const tr_engine* engine, const char* server, const char* tool,
                               char** out_text) {
  return guarded([&] {
    require(engine, "engine");
    require(server, "server");
    require(tool, "tool");
    require(out_text, "out");
    RetrieveRequestMessage req;
    req.server = server;
    req.tool = tool;
    *out_text = dup_string(Engine::format_text(engine->engine->retrieve(req)));
  });
}

tr_status tr_engine_health(const tr_engine* engine, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    require(out_json, "out");
    *out_json = dup_string(engine->engine->health().dump());
  });
}

tr_status tr_engine_options(const tr_engine* engine, char** out_json) {
  return guarded([&] {
    require(engine, "engine");
    require(out_json, "out");
    *out_json = dup_string(options_to_json(engine->engine->options()).dump());
  });
}

void tr_engine_free(tr_engine* engine) { delete engine; }

// --- evaluation ------------------------------------------------------------

tr_status tr_eval_haystack(const tr_catalog* catalog, const tr_index* index, const char* spec_json,
                           const char* options_json, tr_report_format format, char** out) {
  return guarded([&] {
    require(catalog, "catalog");
    require(index, "index");
    require(spec_json, "spec");
    require(out, "out");
    const auto options = engine_options(options_json);
    const auto spec = haystack_spec(parse_options(spec_json, "spec"), options.seed);
    auto provider = make_provider(options.provider);
    index->index->check_compatible(*catalog->catalog, *provider);
    const auto report = run_haystack(spec, *catalog->catalog, *index->index, *provider, options.routing);
    *out = dup_string(
        emit_report(report, format == TR_REPORT_JSON ? ReportFormat::structured : ReportFormat::csv));
  });
}

// --- request protocol ------------------------------------------------------

tr_status tr_extract_requests(const char* text, char** out_json) {
  return guarded([&] {
    require(text, "text");
    require(out_json, "out");
    const auto result = extract_requests(text);
    OrderedJson requests = OrderedJson::array();
    for (const auto& r : result.requests)
      requests.push_back({{"server", r.server_text},
                          {"tool", r.tool_text},
                          {"span", {r.source_span.start, r.source_span.end}}});
    OrderedJson warnings = OrderedJson::array();
    for (const auto& w : result.warnings)
      warnings.push_back({{"kind", warning_kind(w.kind)},
                          {"span", {w.span.start, w.span.end}},
                          {"message", w.message}});
    *out_json = dup_string(OrderedJson{{"requests", requests}, {"warnings", warnings}}.dump());
  });
}

tr_status tr_discovery_prompt(int include_icl, char** out_text) {
  return guarded([&] {
    require(out_text, "out");
    *out_text = dup_string(build_discovery_prompt(include_icl != 0).text());
  });
}

// --- service ---------------------------------------------------------------

tr_status tr_service_create(const tr_engine* engine, tr_service** out) {
  return guarded([&] {
    require(engine, "engine");
    require(out, "out");
    auto s = std::make_unique<tr_service>();
    s->engine = engine->engine;
    s->service = std::make_unique<Service>(s->engine);
    *out = s.release();
  });
}

tr_status tr_service_bind(tr_service* service, const char* host, int port, int* bound_port) {
  return guarded([&] {
    require(service, "service");
    require(host, "host");
    const int p = service->service->bind(host, port);
    if (bound_port != nullptr) *bound_port = p;
  });
}

tr_status tr_service_run(tr_service* service) {
  return guarded([&] {
    require(service, "service");
    service->service->run();
  });
}

void tr_service_stop(tr_service* service) {
  if (service != nullptr) service->service->stop();
}

void tr_service_free(tr_service* service) { delete service; }

}  // extern "C"
