#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "support.hpp"
#include "toolroute/embedding.hpp"
#include "toolroute/errors.hpp"
#include "toolroute/remote_embedding.hpp"

using namespace toolroute;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

// Provider that returns fixed raw vectors, for exercising validation paths.
class FixedProvider final : public EmbeddingProvider {
 public:
  FixedProvider(std::string id, std::size_t dim, std::vector<double> value)
      : id_(std::move(id)), dim_(dim), value_(std::move(value)) {}
  std::string id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) const override {
    return std::vector<std::vector<double>>(texts.size(), value_);
  }

 private:
  std::string id_;
  std::size_t dim_;
  std::vector<double> value_;
};

}  // namespace

TEST_CASE("fallback embedder is deterministic and normalized") {
  const HashingEmbeddingProvider p;
  const auto a = embed("read file", p);
  const auto b = embed("read file", p);
  CHECK(a.values == b.values);
  CHECK(a.dim() == 256);
  CHECK(a.provider_id == p.id());
  CHECK(norm(a.values) == doctest::Approx(1.0).epsilon(1e-6));

  testsupport::Gen g(5);
  for (int i = 0; i < 200; ++i) {
    const auto text = g.words(g.between(1, 20));
    CHECK(norm(embed(text, p).values) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("fallback similarity separates related from unrelated text") {
  const HashingEmbeddingProvider p;
  const auto a = embed("read file from disk", p);
  const double same = cosine_similarity(a, embed("read file from disk", p));
  const double other = cosine_similarity(a, embed("send HTTP request", p));
  CHECK(same == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same > other);
}

TEST_CASE("fallback embedding depends only on the token multiset") {
  const HashingEmbeddingProvider p;
  CHECK(embed("Read the FILE", p).values == embed("file the read", p).values);
  CHECK(embed("a-b c", p).values == embed("c b a", p).values);
  CHECK(HashingEmbeddingProvider::tokenize("Hello, World_42!") ==
        std::vector<std::string>{"hello", "world", "42"});
}

TEST_CASE("cosine similarity on hand-built vectors") {
  const std::vector<double> e1{1, 0}, e2{0, 1}, a{0.6, 0.8};
  CHECK(cosine_similarity(std::span<const double>(e1), std::span<const double>(e1)) == 1.0);
  CHECK(cosine_similarity(std::span<const double>(e1), std::span<const double>(e2)) == 0.0);
  CHECK(cosine_similarity(std::span<const double>(a), std::span<const double>(e1)) ==
        doctest::Approx(0.6).epsilon(1e-15));
  // Non-unit inputs are normalized.
  const std::vector<double> b{3, 4}, c{10, 0};
  CHECK(cosine_similarity(std::span<const double>(b), std::span<const double>(c)) ==
        doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("vector errors") {
  std::vector<double> zero(4, 0.0);
  CHECK(code_of([&] { normalize(zero); }) == ErrorCode::zero_vector);
  const std::vector<double> a{1, 0}, b{1, 0, 0};
  CHECK(code_of([&] { dot(a, b); }) == ErrorCode::dimension_mismatch);
  const HashingEmbeddingProvider p;
  CHECK(code_of([&] { embed("   ", p); }) == ErrorCode::empty_text);
  CHECK(code_of([&] { embed("", p); }) == ErrorCode::empty_text);
  // Text with no tokens hashes to the zero vector.
  CHECK(code_of([&] { embed("!!!", p); }) == ErrorCode::zero_vector);
  const FixedProvider wrong("fixed", 3, {1.0, 2.0});
  CHECK(code_of([&] { embed("x", wrong); }) == ErrorCode::provider_failure);
}

TEST_CASE("index over the two-server fixture") {
  const auto c = load_catalog_file(testsupport::data_path("fixtures/two_servers.json"));
  const HashingEmbeddingProvider p;
  const auto idx = build_index(c, p);
  CHECK(idx.entry_count() == 8);
  CHECK(idx.dim() == 256);
  CHECK(idx.catalog_fingerprint() == c.fingerprint());
  CHECK(idx.server(1).tools.size() == 3);

  SUBCASE("rebuild is byte-identical") {
    CHECK(serialize_index(build_index(c, p)) == serialize_index(idx));
    IndexBuildOptions opts;
    opts.batch_size = 3;
    opts.parallelism = 4;
    CHECK(serialize_index(build_index(c, p, opts)) == serialize_index(idx));
  }

  SUBCASE("save and load round-trip") {
    std::stringstream ss(serialize_index(idx));
    const auto loaded = load_index(ss, c);
    for (std::size_t i = 0; i < c.server_count(); ++i) {
      const auto& x = idx.server(i);
      const auto& y = loaded.server(i);
      for (std::size_t d = 0; d < idx.dim(); ++d) {
        CHECK(std::abs(x.description[d] - y.description[d]) <= 1e-9);
        CHECK(std::abs(x.summary[d] - y.summary[d]) <= 1e-9);
      }
      for (std::size_t t = 0; t < x.tools.size(); ++t)
        for (std::size_t d = 0; d < idx.dim(); ++d) CHECK(std::abs(x.tools[t][d] - y.tools[t][d]) <= 1e-9);
    }
    // The decimal encoding is exact.
    CHECK(loaded == idx);
  }

  SUBCASE("index is bound to its catalog and provider") {
    const auto other = load_catalog_text(
        R"([{"server_name":"fs","server_description":"Filesystem access","server_summary":"x",
             "tools":[{"name":"read_file","description":"Read a file"}]}])");
    std::stringstream ss(serialize_index(idx));
    CHECK(code_of([&] { load_index(ss, other); }) == ErrorCode::index_mismatch);
    CHECK(code_of([&] { idx.check_compatible(other, p); }) == ErrorCode::index_mismatch);
    const HashingEmbeddingProvider wide(512);
    CHECK(code_of([&] { idx.check_compatible(c, wide); }) == ErrorCode::index_mismatch);
    idx.check_compatible(c, p);
  }

  SUBCASE("damaged sidecar") {
    std::stringstream ss("{\"format\": \"toolroute-embedding-index\", \"version\": 1");
    CHECK(code_of([&] { load_index(ss, c); }) == ErrorCode::malformed_document);
  }
}

TEST_CASE("provider failures name the offending entry") {
  const auto c = load_catalog_file(testsupport::data_path("fixtures/two_servers.json"));
  const FixedProvider zero("zero", 2, {0.0, 0.0});
  try {
    build_index(c, zero);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::zero_vector);
    CHECK(e.path().find("servers[0]") != std::string::npos);
  }
}

TEST_CASE("remote provider retries transient failures") {
  httplib::Server srv;
  std::atomic<int> calls{0};
  std::atomic<int> fail_first{1};
  std::atomic<int> status_on_fail{429};
  std::string seen_auth;
  srv.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++calls;
    seen_auth = req.get_header_value("Authorization");
    if (n <= fail_first.load()) {
      res.status = status_on_fail.load();
      res.set_content("{}", "application/json");
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    const auto& input = body.at("input");
    for (std::size_t i = 0; i < input.size(); ++i) {
      std::vector<double> v(body.at("dimensions").get<std::size_t>(), 0.0);
      v[i % v.size()] = 2.0;
      data.push_back({{"index", i}, {"embedding", v}});
    }
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  ::setenv("TOOLROUTE_TEST_EMBED_KEY", "secret", 1);
  RemoteEmbeddingConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.dim = 4;
  cfg.api_key_env = "TOOLROUTE_TEST_EMBED_KEY";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.batch_size = 2;

  SUBCASE("429 then success") {
    const RemoteEmbeddingProvider p(cfg);
    CHECK(p.id() == "openai:text-embedding-3-large:4");
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto out = p.embed_raw(texts);
    REQUIRE(out.size() == 3);
    CHECK(out[1][1] == 2.0);
    CHECK(p.attempts() == 3);  // one retry, then the second batch
    CHECK(seen_auth == "Bearer secret");
    // Normalization happens downstream.
    CHECK(embed("x", p).values[0] == doctest::Approx(1.0));
  }

  SUBCASE("server errors exhaust the attempts") {
    fail_first = 100;
    status_on_fail = 503;
    const RemoteEmbeddingProvider p(cfg);
    const std::vector<std::string> texts{"a"};
    CHECK(code_of([&] { p.embed_raw(texts); }) == ErrorCode::provider_failure);
    CHECK(p.attempts() == 3);
  }

  SUBCASE("client errors are not retried") {
    fail_first = 100;
    status_on_fail = 401;
    const RemoteEmbeddingProvider p(cfg);
    const std::vector<std::string> texts{"a"};
    CHECK(code_of([&] { p.embed_raw(texts); }) == ErrorCode::provider_failure);
    CHECK(p.attempts() == 1);
  }

  SUBCASE("missing key") {
    cfg.api_key_env = "TOOLROUTE_TEST_UNSET_KEY";
    ::unsetenv("TOOLROUTE_TEST_UNSET_KEY");
    const RemoteEmbeddingProvider p(cfg);
    const std::vector<std::string> texts{"a"};
    CHECK(code_of([&] { p.embed_raw(texts); }) == ErrorCode::provider_failure);
    CHECK(p.attempts() == 0);
  }

  srv.stop();
  th.join();
}
