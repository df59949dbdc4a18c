// toolroute command-line front end. Uses only the C API.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "toolroute/toolroute.h"

namespace {

using json = nlohmann::ordered_json;

struct CliFailure {
  tr_status status;
};

void check(tr_status st) {
  if (st != TR_OK) throw CliFailure{st};
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { tr_free_string(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};

using CatalogHandle = Handle<tr_catalog, tr_catalog_free>;
using IndexHandle = Handle<tr_index, tr_index_free>;
using EngineHandle = Handle<tr_engine, tr_engine_free>;
using ServiceHandle = Handle<tr_service, tr_service_free>;

// Routing flags shared by query, eval and serve. Only flags actually given on
// the command line are forwarded, so environment and config file settings
// still apply to the rest.
struct RoutingFlags {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t max_expanded_k = 0;
  double epsilon = 0.0;
  bool clamp = false;
  std::string provider;
  std::uint64_t seed = 0;
  double floor = 0.0;
  std::string config;

  std::vector<std::pair<std::string, CLI::Option*>> given;

  void attach(CLI::App* app) {
    given = {
        {"m", app->add_option("--m", m, "Servers kept by the first stage (default 5)")},
        {"k", app->add_option("-k,--k", k, "Tools returned before tie expansion (default 1)")},
        {"max_expanded_k",
         app->add_option("--max-expanded-k", max_expanded_k, "Upper bound on tie expansion (default 5)")},
        {"epsilon", app->add_option("--epsilon", epsilon, "Tie cluster width (default 0.02)")},
        {"clamp", app->add_flag("--clamp,!--no-clamp", clamp, "Clamp similarities to [0, 1]")},
        {"provider", app->add_option("--provider", provider, "Embedding provider: fallback or openai")},
        {"seed", app->add_option("--seed", seed, "Random seed")},
        {"not_found_floor", app->add_option("--floor", floor, "Not-found score floor (default 0.1)")},
        {"config_file", app->add_option("--config", config, "JSON config file")},
    };
  }

  std::string to_json() const {
    json j = json::object();
    for (const auto& [key, opt] : given) {
      if (opt->count() == 0) continue;
      if (key == "m") j[key] = m;
      else if (key == "k") j[key] = k;
      else if (key == "max_expanded_k") j[key] = max_expanded_k;
      else if (key == "epsilon") j[key] = epsilon;
      else if (key == "clamp") j[key] = clamp;
      else if (key == "provider") j[key] = provider;
      else if (key == "seed") j[key] = seed;
      else if (key == "not_found_floor") j[key] = floor;
      else if (key == "config_file") j[key] = config;
    }
    return j.dump();
  }

  std::optional<std::string> provider_given() const {
    for (const auto& [key, opt] : given)
      if (key == "provider" && opt->count() > 0) return provider;
    return std::nullopt;
  }
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    throw CliFailure{TR_E_IO};
  }
  out << text;
}

std::string read_input(const std::string& path) {
  if (path.empty() || path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << path << "\n";
    throw CliFailure{TR_E_IO};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void load_catalog_and_index(const std::string& catalog_path, const std::string& index_path,
                            CatalogHandle& catalog, IndexHandle& index) {
  check(tr_catalog_load_file(catalog_path.c_str(), &catalog.p));
  check(tr_index_load_file(catalog.p, index_path.c_str(), &index.p));
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(part, &used);
    if (used != part.size()) throw CLI::ValidationError("--sizes", "not an integer: " + part);
    sizes.push_back(static_cast<std::size_t>(v));
  }
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage tool retrieval over an MCP server catalog"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tr_version()));

  // index
  std::string catalog_path, index_path, out_path, index_provider = "fallback";
  std::size_t batch_size = 64, parallelism = 1;
  auto* index_cmd = app.add_subcommand("index", "Embed a catalog and write the index sidecar");
  index_cmd->add_option("--catalog", catalog_path, "Catalog JSON file")->required();
  index_cmd->add_option("-o,--out", out_path, "Index file to write")->required();
  index_cmd->add_option("--provider", index_provider, "Embedding provider: fallback or openai");
  index_cmd->add_option("--batch-size", batch_size, "Texts per provider call");
  index_cmd->add_option("--parallelism", parallelism, "Provider calls in flight");

  // query
  RoutingFlags query_flags;
  std::string server_text, tool_text, query_format = "text";
  auto* query_cmd = app.add_subcommand("query", "Rank tools for one server/tool request");
  query_cmd->add_option("--catalog", catalog_path, "Catalog JSON file")->required();
  query_cmd->add_option("--index", index_path, "Index file")->required();
  query_cmd->add_option("--server", server_text, "Server-intent text")->required();
  query_cmd->add_option("--tool", tool_text, "Tool-intent text")->required();
  query_cmd->add_option("--format", query_format, "Output format")
      ->check(CLI::IsMember({"text", "json"}));
  query_flags.attach(query_cmd);

  // eval
  RoutingFlags eval_flags;
  std::string sizes_text, positions_text, mode = "exact", eval_format = "csv", synthetic;
  std::size_t random_needles = 4, eval_parallelism = 1;
  double drop_fraction = 0.3;
  bool icl = false;
  auto* eval_cmd = app.add_subcommand("eval", "Needle-in-a-haystack evaluation");
  auto* eval_catalog = eval_cmd->add_option("--catalog", catalog_path, "Catalog JSON file");
  auto* eval_index = eval_cmd->add_option("--index", index_path, "Index file");
  auto* eval_synth = eval_cmd->add_option("--synthetic", synthetic,
                                          "Use a generated catalog instead, as SERVERS:TOOLS");
  eval_catalog->needs(eval_index)->excludes(eval_synth);
  eval_index->needs(eval_catalog);
  eval_cmd->add_option("--sizes", sizes_text, "Comma-separated haystack sizes")->required();
  eval_cmd->add_option("--positions", positions_text, "Comma-separated: first,middle,last,random");
  eval_cmd->add_option("--random-needles", random_needles, "Random needles per size");
  eval_cmd->add_option("--mode", mode, "Query mode")->check(CLI::IsMember({"exact", "perturbed"}));
  eval_cmd->add_option("--drop-fraction", drop_fraction, "Words dropped in perturbed mode");
  eval_cmd->add_flag("--icl", icl, "Include the in-context example in the prompt");
  eval_cmd->add_option("--parallelism", eval_parallelism, "Sizes evaluated concurrently");
  eval_cmd->add_option("--format", eval_format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  eval_cmd->add_option("-o,--out", out_path, "Report file (default stdout)");
  eval_flags.attach(eval_cmd);

  // serve
  RoutingFlags serve_flags;
  std::string bind = "127.0.0.1:8080";
  auto* serve_cmd = app.add_subcommand("serve", "Serve retrieval over HTTP");
  serve_cmd->add_option("--catalog", catalog_path, "Catalog JSON file")->required();
  serve_cmd->add_option("--index", index_path, "Index file")->required();
  serve_cmd->add_option("--bind", bind, "HOST:PORT (port 0 picks a free port)");
  serve_flags.attach(serve_cmd);

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Catalog statistics as JSON");
  stats_cmd->add_option("--catalog", catalog_path, "Catalog JSON file")->required();

  // synth
  std::size_t synth_servers = 10, synth_tools = 50;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Write a deterministic synthetic catalog");
  synth_cmd->add_option("--servers", synth_servers, "Server count");
  synth_cmd->add_option("--tools", synth_tools, "Tool count");
  synth_cmd->add_option("--seed", synth_seed, "Seed");
  synth_cmd->add_option("-o,--out", out_path, "Catalog file to write")->required();

  // extract
  std::string input_path;
  auto* extract_cmd = app.add_subcommand("extract", "Extract tool requests from model output (JSON)");
  extract_cmd->add_option("input", input_path, "Text file (default stdin)");

  // prompt
  bool prompt_icl = false;
  auto* prompt_cmd = app.add_subcommand("prompt", "Print the discovery prompt");
  prompt_cmd->add_flag("--icl", prompt_icl, "Include the in-context example");

  CLI11_PARSE(app, argc, argv);

  try {
    if (index_cmd->parsed()) {
      CatalogHandle catalog;
      IndexHandle index;
      check(tr_catalog_load_file(catalog_path.c_str(), &catalog.p));
      json opts = {{"provider", index_provider}, {"batch_size", batch_size}, {"parallelism", parallelism}};
      check(tr_index_build(catalog.p, opts.dump().c_str(), &index.p));
      check(tr_index_save_file(index.p, out_path.c_str()));
      OwnedString provider;
      check(tr_index_provider_id(index.p, &provider.p));
      std::cout << tr_index_entry_count(index.p) << " embeddings (" << tr_catalog_server_count(catalog.p)
                << " servers, " << tr_catalog_tool_count(catalog.p) << " tools, provider "
                << provider.str() << ") written to " << out_path << "\n";
    } else if (query_cmd->parsed()) {
      CatalogHandle catalog;
      IndexHandle index;
      EngineHandle engine;
      load_catalog_and_index(catalog_path, index_path, catalog, index);
      check(tr_engine_create(catalog.p, index.p, query_flags.to_json().c_str(), &engine.p));
      OwnedString out;
      if (query_format == "json") {
        json req = {{"server", server_text}, {"tool", tool_text}};
        check(tr_engine_retrieve(engine.p, req.dump().c_str(), &out.p));
        std::cout << json::parse(out.str()).dump(2) << "\n";
      } else {
        check(tr_engine_query_text(engine.p, server_text.c_str(), tool_text.c_str(), &out.p));
        std::cout << out.str();
      }
    } else if (eval_cmd->parsed()) {
      CatalogHandle catalog;
      IndexHandle index;
      if (!synthetic.empty()) {
        const auto colon = synthetic.find(':');
        if (colon == std::string::npos) {
          std::cerr << "error: --synthetic expects SERVERS:TOOLS\n";
          return 2;
        }
        const auto servers = std::stoull(synthetic.substr(0, colon));
        const auto tools = std::stoull(synthetic.substr(colon + 1));
        std::uint64_t seed = 0;
        if (auto opt = eval_cmd->get_option("--seed"); opt->count() > 0) seed = eval_flags.seed;
        check(tr_catalog_synthetic(servers, tools, seed, &catalog.p));
        json opts = json::object();
        if (auto p = eval_flags.provider_given()) opts["provider"] = *p;
        opts["parallelism"] = eval_parallelism;
        check(tr_index_build(catalog.p, opts.dump().c_str(), &index.p));
      } else if (!catalog_path.empty()) {
        load_catalog_and_index(catalog_path, index_path, catalog, index);
      } else {
        std::cerr << "error: eval needs --catalog and --index, or --synthetic\n";
        return 2;
      }
      json spec = {{"sizes", parse_sizes(sizes_text)},
                   {"random_needles", random_needles},
                   {"query_mode", mode},
                   {"drop_fraction", drop_fraction},
                   {"include_icl", icl},
                   {"parallelism", eval_parallelism}};
      if (!positions_text.empty()) {
        json positions = json::array();
        std::stringstream ss(positions_text);
        std::string p;
        while (std::getline(ss, p, ','))
          if (!p.empty()) positions.push_back(p);
        spec["positions"] = positions;
      }
      OwnedString report;
      check(tr_eval_haystack(catalog.p, index.p, spec.dump().c_str(), eval_flags.to_json().c_str(),
                             eval_format == "json" ? TR_REPORT_JSON : TR_REPORT_CSV, &report.p));
      std::string text = report.str();
      if (eval_format == "json") text = json::parse(text).dump(2) + "\n";
      write_output(text, out_path);
    } else if (serve_cmd->parsed()) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "error: --bind expects HOST:PORT\n";
        return 2;
      }
      const std::string host = bind.substr(0, colon);
      const int port = std::stoi(bind.substr(colon + 1));
      CatalogHandle catalog;
      IndexHandle index;
      EngineHandle engine;
      ServiceHandle service;
      load_catalog_and_index(catalog_path, index_path, catalog, index);
      check(tr_engine_create(catalog.p, index.p, serve_flags.to_json().c_str(), &engine.p));
      check(tr_service_create(engine.p, &service.p));
      int bound = 0;
      check(tr_service_bind(service.p, host.c_str(), port, &bound));
      std::cout << "listening on " << host << ":" << bound << std::endl;
      check(tr_service_run(service.p));
    } else if (stats_cmd->parsed()) {
      CatalogHandle catalog;
      OwnedString stats;
      check(tr_catalog_load_file(catalog_path.c_str(), &catalog.p));
      check(tr_catalog_stats_json(catalog.p, &stats.p));
      std::cout << json::parse(stats.str()).dump(2) << "\n";
    } else if (synth_cmd->parsed()) {
      CatalogHandle catalog;
      check(tr_catalog_synthetic(synth_servers, synth_tools, synth_seed, &catalog.p));
      check(tr_catalog_save_file(catalog.p, out_path.c_str()));
      std::cout << tr_catalog_server_count(catalog.p) << " servers, " << tr_catalog_tool_count(catalog.p)
                << " tools written to " << out_path << "\n";
    } else if (extract_cmd->parsed()) {
      const std::string text = read_input(input_path);
      OwnedString out;
      check(tr_extract_requests(text.c_str(), &out.p));
      std::cout << json::parse(out.str()).dump(2) << "\n";
    } else if (prompt_cmd->parsed()) {
      OwnedString out;
      check(tr_discovery_prompt(prompt_icl ? 1 : 0, &out.p));
      std::cout << out.str() << "\n";
    }
  } catch (const CliFailure& f) {
    const std::string message = tr_last_error();
    std::cerr << "error: " << (message.empty() ? tr_status_name(f.status) : message) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
