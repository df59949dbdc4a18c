/*
 * toolroute C API.
 *
 * Every object is an opaque handle released with its *_free function. Calls
 * that can fail return a tr_status; on failure tr_last_error() and
 * tr_last_error_path() describe the problem for the calling thread. Strings
 * returned through char** out-parameters are heap allocated and must be
 * released with tr_free_string().
 *
 * Catalogs, indexes and engines are immutable after creation and may be
 * shared between threads.
 */
#ifndef TOOLROUTE_H
#define TOOLROUTE_H

#include <stddef.h>
#include <stdint.h>

#if defined(TOOLROUTE_BUILDING_LIBRARY)
#define TR_API __attribute__((visibility("default")))
#else
#define TR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tr_status {
  TR_OK = 0,
  TR_E_INVALID_ARGUMENT = 1,
  TR_E_IO = 2,
  TR_E_MALFORMED_DOCUMENT = 3,
  TR_E_SCHEMA_VIOLATION = 4,
  TR_E_EMPTY_TEXT = 5,
  TR_E_PROVIDER_FAILURE = 6,
  TR_E_DIMENSION_MISMATCH = 7,
  TR_E_ZERO_VECTOR = 8,
  TR_E_INDEX_MISMATCH = 9,
  TR_E_EMPTY_REQUEST_FIELD = 10,
  TR_E_FORMAT = 11,
  TR_E_SIZE_EXCEEDS_CATALOG = 12,
  TR_E_INTERNAL = 99
} tr_status;

typedef enum tr_report_format { TR_REPORT_CSV = 0, TR_REPORT_JSON = 1 } tr_report_format;

typedef struct tr_catalog tr_catalog;
typedef struct tr_index tr_index;
typedef struct tr_engine tr_engine;
typedef struct tr_service tr_service;

TR_API const char* tr_version(void);
TR_API const char* tr_status_name(tr_status status);
TR_API const char* tr_last_error(void);
TR_API const char* tr_last_error_path(void);
TR_API void tr_free_string(char* s);

/* Catalog */
TR_API tr_status tr_catalog_load_file(const char* path, tr_catalog** out);
TR_API tr_status tr_catalog_load_text(const char* json, tr_catalog** out);
TR_API tr_status tr_catalog_synthetic(size_t servers, size_t tools, uint64_t seed, tr_catalog** out);
TR_API tr_status tr_catalog_save_file(const tr_catalog* catalog, const char* path);
TR_API size_t tr_catalog_server_count(const tr_catalog* catalog);
TR_API size_t tr_catalog_tool_count(const tr_catalog* catalog);
TR_API tr_status tr_catalog_stats_json(const tr_catalog* catalog, char** out);
TR_API tr_status tr_catalog_fingerprint(const tr_catalog* catalog, char** out);
TR_API void tr_catalog_free(tr_catalog* catalog);

/* Embedding index. options_json may be NULL or an object with keys
 * "provider" ("fallback" | "openai"), "batch_size", "parallelism". */
TR_API tr_status tr_index_build(const tr_catalog* catalog, const char* options_json, tr_index** out);
TR_API tr_status tr_index_load_file(const tr_catalog* catalog, const char* path, tr_index** out);
TR_API tr_status tr_index_save_file(const tr_index* index, const char* path);
TR_API size_t tr_index_entry_count(const tr_index* index);
TR_API tr_status tr_index_provider_id(const tr_index* index, char** out);
TR_API void tr_index_free(tr_index* index);

/* Engine. options_json may be NULL or an object with keys m, k,
 * max_expanded_k, epsilon, clamp, provider, seed, not_found_floor,
 * config_file. Unset keys fall back to TOOLROUTE_* environment variables,
 * then the config file, then defaults. */
TR_API tr_status tr_engine_create(const tr_catalog* catalog, const tr_index* index,
                                  const char* options_json, tr_engine** out);
/* request_json: {"server": ..., "tool": ..., "k"?: n, "clamp"?: bool} */
TR_API tr_status tr_engine_retrieve(const tr_engine* engine, const char* request_json, char** out_json);
TR_API tr_status tr_engine_query_text(const tr_engine* engine, const char* server, const char* tool,
                                      char** out_text);
TR_API tr_status tr_engine_health(const tr_engine* engine, char** out_json);
TR_API tr_status tr_engine_options(const tr_engine* engine, char** out_json);
TR_API void tr_engine_free(tr_engine* engine);

/* Needle-in-a-haystack evaluation. spec_json keys: sizes (required), positions,
 * random_needles, query_mode ("exact" | "perturbed"), seed, drop_fraction,
 * include_icl, parallelism. options_json as for tr_engine_create. */
TR_API tr_status tr_eval_haystack(const tr_catalog* catalog, const tr_index* index, const char* spec_json,
                                  const char* options_json, tr_report_format format, char** out);

/* Request protocol helpers. */
TR_API tr_status tr_extract_requests(const char* text, char** out_json);
TR_API tr_status tr_discovery_prompt(int include_icl, char** out_text);

/* HTTP service. port 0 binds an ephemeral port; the bound port is written to
 * *bound_port. tr_service_run blocks until tr_service_stop is called from
 * another thread. */
TR_API tr_status tr_service_create(const tr_engine* engine, tr_service** out);
TR_API tr_status tr_service_bind(tr_service* service, const char* host, int port, int* bound_port);
TR_API tr_status tr_service_run(tr_service* service);
TR_API void tr_service_stop(tr_service* service);
TR_API void tr_service_free(tr_service* service);

#ifdef __cplusplus
}
#endif

#endif /* TOOLROUTE_H */
