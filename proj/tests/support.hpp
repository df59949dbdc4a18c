// Shared helpers for the test binaries: fixture paths and hand-rolled
// generators for property tests.
#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toolroute/catalog.hpp"

namespace testsupport {

inline std::string data_path(const std::string& rel) { return std::string(TOOLROUTE_TEST_DATA) + "/" + rel; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t next() { return rng_(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  std::string word(std::size_t min_len = 3, std::size_t max_len = 9) {
    std::string w;
    const auto n = between(min_len, max_len);
    for (std::size_t i = 0; i < n; ++i) w.push_back(static_cast<char>('a' + below(26)));
    return w;
  }

  std::string words(std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out.push_back(' ');
      out += word();
    }
    return out;
  }

  // Printable ASCII plus a few multi-byte sequences, no newlines.
  std::string line_text(std::size_t max_len) {
    static const char* kExtra[] = {"\xc3\xa9", "\xe2\x82\xac", "\t", "#", ":", "<", ">", "/"};
    std::string out;
    const auto n = below(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (chance(0.1)) out += kExtra[below(std::size(kExtra))];
      else out.push_back(static_cast<char>(0x20 + below(0x5f)));
    }
    return out;
  }

  std::string bytes(std::size_t max_len) {
    std::string out;
    const auto n = below(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(below(256)));
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Random catalog with word-bag texts. Names are unique by construction.
inline toolroute::Catalog random_catalog(Gen& g, std::size_t max_servers, std::size_t max_tools) {
  using namespace toolroute;
  std::vector<ServerRecord> servers;
  const auto n_servers = g.between(1, max_servers);
  for (std::size_t i = 0; i < n_servers; ++i) {
    ServerRecord s;
    s.name = "srv" + std::to_string(i) + "_" + g.word(2, 4);
    s.description = g.words(g.between(2, 8));
    s.summary = g.words(g.between(4, 14));
    const auto n_tools = g.between(1, max_tools);
    for (std::size_t j = 0; j < n_tools; ++j) {
      ToolRecord t;
      t.name = "tool" + std::to_string(j) + "_" + g.word(2, 4);
      t.description = g.words(g.between(2, 10));
      t.parameters.push_back(parse_parameter("x", "(string) " + g.words(2)));
      s.tools.push_back(std::move(t));
    }
    servers.push_back(std::move(s));
  }
  return Catalog::create(std::move(servers));
}

}  // namespace testsupport
