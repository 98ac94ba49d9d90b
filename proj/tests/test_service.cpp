#include <gtest/gtest.h>

#include <thread>

#include "linkage/http.hpp"
#include "linkage/service.hpp"
#include "test_support.hpp"

namespace linkage {
namespace {

using nlohmann::json;
using service::Api;

json four_bar_json() { return io::mechanism_json(testing::four_bar({0.6, 0.75}, {0.8, 0.5})); }

Mechanism locking_four_bar() {
  const Vec2 pivot{0.78, 0.5};
  return testing::four_bar(*dyad_solve(kActuatorTip, pivot, 0.1, 0.15, 1.0), pivot);
}

service::Response post(const Api& api, const std::string& path, const json& body) {
  return api.handle("POST", path, body.dump());
}

const Atlas& small_atlas() {
  static const Atlas a = [] {
    GenerationConfig cfg;
    cfg.count = 40;
    cfg.n_min = 6;
    cfg.n_max = 10;
    std::vector<CurveRecord> records;
    MechanismStore store;
    DatasetSink sink;
    sink.on_mechanism = [&](const GeneratedMechanism& g) {
      store.emplace(g.id, g.mechanism);
      for (auto& r : curve_records(g.id, g.mechanism, g.trajectory)) records.push_back(r);
    };
    generate_dataset(cfg, sink);
    return Atlas(records, store, 2);
  }();
  return a;
}

TEST(Api, Health) {
  const Api api;
  const auto r = api.handle("GET", "/health", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "ok");
}

TEST(Api, SimulateFourBar) {
  const Api api;
  const auto r = post(api, "/simulate", {{"mechanism", four_bar_json()}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["trajectory"]["T"], 200);
  EXPECT_EQ(r.body["trajectory"]["points"].size(), 4u);
  EXPECT_EQ(r.body["trajectory"]["points"][2].size(), 400u);

  const auto custom = post(api, "/simulate", {{"mechanism", four_bar_json()}, {"T", 8}});
  ASSERT_EQ(custom.status, 200);
  EXPECT_EQ(custom.body["trajectory"]["T"], 8);
}

TEST(Api, SimulateLockingIsNotAnError) {
  const Api api;
  const auto r = post(api, "/simulate", {{"mechanism", io::mechanism_json(locking_four_bar())}});
  ASSERT_EQ(r.status, 200);
  ASSERT_TRUE(r.body.contains("locking"));
  EXPECT_EQ(r.body["locking"]["joint"], 2);
  EXPECT_FALSE(r.body.contains("trajectory"));
}

TEST(Api, SimulateRejectsBadInput) {
  const Api api;
  for (int T : {7, 2001}) {
    const auto r = post(api, "/simulate", {{"mechanism", four_bar_json()}, {"T", T}});
    EXPECT_EQ(r.status, 400);
  }
  json open = four_bar_json();
  open["adjacency"] = "100100";  // rocker detached from ground
  const auto r = post(api, "/simulate", {{"mechanism", open}});
  EXPECT_EQ(r.status, 422);
  ASSERT_TRUE(r.body["error"].contains("diagnostics"));
  EXPECT_FALSE(r.body["error"]["diagnostics"].empty());

  EXPECT_EQ(post(api, "/simulate", json::object()).status, 400);
  EXPECT_EQ(api.handle("POST", "/simulate", "{\"mechanism\": ").status, 400);
  EXPECT_EQ(api.handle("POST", "/simulate", "[1,2]").status, 400);
}

TEST(Api, RoutingErrors) {
  const Api api;
  EXPECT_EQ(api.handle("POST", "/nope", "{}").status, 404);
  EXPECT_EQ(api.handle("GET", "/simulate", "").status, 405);
}

TEST(Api, OperatorsProduceValidMechanisms) {
  const Api api;
  auto r = post(api, "/operator/apply",
                {{"mechanism", four_bar_json()}, {"op", "ng"}, {"position", {0.3, 0.5}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  Mechanism m = io::mechanism_from_json(r.body["mechanism"]);
  EXPECT_EQ(m.size(), 5u);
  EXPECT_EQ(compute_mobility(m).m, 1);

  r = post(api, "/operator/apply",
           {{"mechanism", four_bar_json()}, {"op", "ns"}, {"i", 1}, {"j", 2}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  m = io::mechanism_from_json(r.body["mechanism"]);
  EXPECT_EQ(m.size(), 5u);
  EXPECT_TRUE(validate(m).empty());

  r = post(api, "/operator/apply",
           {{"mechanism", four_bar_json()}, {"op", "j"}, {"i", 1}, {"j", 2}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_TRUE(validate(io::mechanism_from_json(r.body["mechanism"])).empty());
}

TEST(Api, OperatorErrors) {
  const Api api;
  EXPECT_EQ(post(api, "/operator/apply",
                 {{"mechanism", four_bar_json()}, {"op", "j"}, {"i", 1}, {"j", 9}})
                .status,
            422);
  EXPECT_EQ(post(api, "/operator/apply", {{"mechanism", four_bar_json()}, {"op", "ng"}}).status,
            400);
  EXPECT_EQ(post(api, "/operator/apply", {{"mechanism", four_bar_json()}, {"op", "x"}}).status,
            400);
  EXPECT_EQ(post(api, "/operator/apply", {{"mechanism", four_bar_json()}, {"op", "j"}}).status,
            400);
}

TEST(Api, NeverReturnsInvalidMechanisms) {
  const Api api;
  Rng rng = make_stream({77});
  std::size_t accepted = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Mechanism base = testing::random_valid(static_cast<std::uint64_t>(trial % 10), 7);
    const char* ops[] = {"j", "ns", "ng"};
    const std::string op = ops[uniform_int(rng, 0, 2)];
    json req{{"mechanism", io::mechanism_json(base)}, {"op", op}};
    req["i"] = uniform_int(rng, 0, base.size() - 1);
    req["j"] = uniform_int(rng, 0, base.size() - 1);
    req["position"] = {uniform01(rng), uniform01(rng)};
    const auto r = post(api, "/operator/apply", req);
    if (r.status == 200) {
      ++accepted;
      EXPECT_TRUE(validate(io::mechanism_from_json(r.body["mechanism"])).empty());
    } else {
      EXPECT_GE(r.status, 400);
      EXPECT_LT(r.status, 500) << r.body.dump();
    }
  }
  EXPECT_GT(accepted, 0u);
}

TEST(Api, RandomMechanism) {
  const Api api;
  for (std::size_t n : {5u, 8u, 12u}) {
    const auto r = post(api, "/mechanism/random", {{"n", n}, {"seed", 3}});
    ASSERT_EQ(r.status, 200) << r.body.dump();
    const Mechanism m = io::mechanism_from_json(r.body["mechanism"]);
    EXPECT_EQ(m.size(), n);
    EXPECT_TRUE(validate(m).empty());
    EXPECT_TRUE(check_feasible(m, compile_plan(m)));
    EXPECT_EQ(post(api, "/mechanism/random", {{"n", n}, {"seed", 3}}).body, r.body);
  }
  EXPECT_EQ(post(api, "/mechanism/random", {{"n", 4}}).status, 400);
  EXPECT_EQ(post(api, "/mechanism/random", {{"n", 21}}).status, 400);
}

TEST(Api, RetrieveWithoutAtlas) {
  const Api api;
  EXPECT_EQ(post(api, "/retrieve", {{"points", {{0, 0}, {1, 1}}}}).status, 503);
}

TEST(Api, RetrieveReturnsSortedHits) {
  const Atlas& atlas = small_atlas();
  const Api api(&atlas);
  json pts = json::array();
  for (int i = 0; i < 40; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 40.0;
    pts.push_back({std::cos(t), 0.5 * std::sin(t)});
  }
  const auto r = post(api, "/retrieve", {{"points", pts}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const auto& hits = r.body["hits"];
  ASSERT_EQ(hits.size(), 3u);
  for (std::size_t i = 1; i < hits.size(); ++i)
    EXPECT_LE(hits[i - 1]["distance"].get<double>(), hits[i]["distance"].get<double>());
  for (const auto& h : hits) {
    const Mechanism m = io::mechanism_from_json(h["reduced"]["mechanism"]);
    EXPECT_TRUE(validate(m).empty());
    EXPECT_EQ(h["path"].size(), 400u);
  }
  EXPECT_EQ(post(api, "/retrieve", {{"points", {{0, 0}}}}).status, 400);
  EXPECT_EQ(post(api, "/retrieve", {{"points", "x"}}).status, 400);
}

TEST(Http, LiveServer) {
  const Atlas& atlas = small_atlas();
  const Api api(&atlas);
  httplib::Server server;
  service::bind(server, api);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["atlas_size"], atlas.size());

  auto sim = client.Post("/simulate", json{{"mechanism", four_bar_json()}}.dump(),
                         "application/json");
  ASSERT_TRUE(sim);
  EXPECT_EQ(sim->status, 200);
  EXPECT_EQ(json::parse(sim->body)["trajectory"]["T"], 200);

  auto bad = client.Post("/simulate", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(json::parse(bad->body).contains("error"));

  auto missing = client.Get("/missing");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_TRUE(json::parse(missing->body).contains("error"));

  server.stop();
  th.join();
}

}  // namespace
}  // namespace linkage
