#include <doctest.h>
#include <httplib.h>

#include <future>
#include <thread>

#include "support.hpp"
#include "toolroute/errors.hpp"
#include "toolroute/service.hpp"

using namespace toolroute;

namespace {

// Hashing embedder that fails on demand, to exercise upstream errors.
class FlakyProvider final : public EmbeddingProvider {
 public:
  std::string id() const override { return "flaky"; }
  std::size_t dim() const override { return inner_.dim(); }
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts) const override {
    for (const auto& t : texts)
      if (t.find("boom") != std::string::npos) throw Error(ErrorCode::provider_failure, "upstream is down");
    return inner_.embed_raw(texts);
  }

 private:
  HashingEmbeddingProvider inner_;
};

std::shared_ptr<const Engine> make_engine(std::shared_ptr<const EmbeddingProvider> provider) {
  auto catalog = std::make_shared<const Catalog>(load_catalog_file(testsupport::data_path("fixtures/two_servers.json")));
  auto index = std::make_shared<const EmbeddingIndex>(build_index(*catalog, *provider));
  return std::make_shared<const Engine>(catalog, index, provider, EngineOptions{});
}

struct Running {
  Service service;
  int port = 0;
  std::thread thread;

  explicit Running(std::shared_ptr<const Engine> engine) : service(std::move(engine)) {
    port = service.bind("127.0.0.1", 0);
    thread = std::thread([this] { service.run(); });
    for (int i = 0; i < 500 && !service.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  ~Running() {
    service.stop();
    thread.join();
  }
};

}  // namespace

TEST_CASE("handlers without a socket") {
  const Service s(make_engine(std::make_shared<HashingEmbeddingProvider>()));
  const auto ok = s.handle_retrieve(R"({"server":"Filesystem access","tool":"Read a file"})");
  CHECK(ok.status == 200);
  CHECK(nlohmann::json::parse(ok.body).at("candidates")[0].at("score") == doctest::Approx(1.0));

  const auto empty = s.handle_retrieve(R"({"server":"github","tool":""})");
  CHECK(empty.status == 400);
  const auto err = nlohmann::json::parse(empty.body).at("error");
  CHECK(err.at("field") == "tool");
  CHECK(err.at("code") == "EmptyRequestField");

  CHECK(s.handle_retrieve("not json").status == 400);
  CHECK(s.handle_retrieve(R"({"server":"x","tool":"y","k":-1})").status == 400);
  CHECK(s.handle_health().status == 200);
}

TEST_CASE("provider failures are upstream errors") {
  const Service s(make_engine(std::make_shared<FlakyProvider>()));
  const auto r = s.handle_retrieve(R"({"server":"boom","tool":"x"})");
  CHECK(r.status == 502);
  CHECK(nlohmann::json::parse(r.body).at("error").at("code") == "ProviderFailure");
}

TEST_CASE("http endpoints") {
  const auto engine = make_engine(std::make_shared<HashingEmbeddingProvider>());
  Running running(engine);
  httplib::Client client("127.0.0.1", running.port);

  auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(nlohmann::json::parse(health->body).at("embeddings") == 8);

  const std::string body = R"({"server":"github","tool":"open a pull request","k":2})";
  auto res = client.Post("/v1/retrieve", body, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == engine->retrieve_json(body));

  auto bad = client.Post("/v1/retrieve", R"({"server":"github"})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(nlohmann::json::parse(bad->body).at("error").at("field") == "tool");

  auto missing = client.Get("/v1/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("concurrent identical requests") {
  const auto engine = make_engine(std::make_shared<HashingEmbeddingProvider>());
  Running running(engine);
  const std::string body = R"({"server":"code hosting","tool":"search code across repositories"})";
  std::vector<std::future<std::string>> replies;
  for (int i = 0; i < 100; ++i) {
    replies.push_back(std::async(std::launch::async, [&] {
      httplib::Client client("127.0.0.1", running.port);
      auto res = client.Post("/v1/retrieve", body, "application/json");
      return res && res->status == 200 ? res->body : std::string("failed");
    }));
  }
  const auto expected = engine->retrieve_json(body);
  for (auto& f : replies) CHECK(f.get() == expected);
}

TEST_CASE("bind errors") {
  Service s(make_engine(std::make_shared<HashingEmbeddingProvider>()));
  CHECK_THROWS_AS(s.bind("127.0.0.1", 70000), Error);
  CHECK_THROWS_AS(s.run(), Error);
}
