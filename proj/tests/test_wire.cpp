#include <softchain/wire.hpp>

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>
#include <thread>

using namespace softchain;
using nlohmann::json;

namespace {

json call(WireSession& s, const json& req) { return json::parse(s.handle(req.dump())); }

json zeros() { return json(std::vector<double>(13, 0.0)); }

const json kFixedReset = {{"op", "reset"},
                          {"seed", 5},
                          {"config",
                           {{"box", {{"size", {0.4, 0.4, 0.7}}, {"mass", 5.0}}},
                            {"randomize_pose", false},
                            {"offset_x", 0.02},
                            {"yaw", 0.1}}}};

}  // namespace

TEST_CASE("hello reports the interface") {
  WireSession s(default_model());
  const json r = call(s, {{"op", "hello"}});
  CHECK(r["ok"] == true);
  CHECK(r["version"] == kWireVersion);
  CHECK(r["obs_dim"] == 93);
  CHECK(r["act_dim"] == 13);
}

TEST_CASE("malformed requests are rejected without ending the session") {
  WireSession s(default_model());
  for (const std::string line : {"", "[1,2]", "{\"op\":3}", "{\"op\":\"fly\"}", "{\"nope\":1}"}) {
    const json r = json::parse(s.handle(line));
    CHECK(r["ok"] == false);
    CHECK(r["error"].is_string());
  }
  CHECK(call(s, {{"op", "step"}, {"action", zeros()}})["error"] == "step before reset");
  CHECK(call(s, {{"op", "reset"}, {"seed", "x"}})["ok"] == false);
  CHECK(call(s, {{"op", "reset"}, {"reward", "dense"}})["ok"] == false);
  CHECK(call(s, {{"op", "reset"}, {"config", {{"box", {{"size", {1, 2}}}}}}})["ok"] == false);
  CHECK(call(s, {{"op", "reset"}, {"config", {{"perturb", {{"strength", 1}}}}}})["ok"] == false);
  CHECK(call(s, {{"op", "reset"}, {"config", {{"max_steps", 1.5}}}})["ok"] == false);
  REQUIRE(call(s, kFixedReset)["ok"] == true);
  CHECK(call(s, {{"op", "step"}, {"action", json::array({1, 2})}})["error"] == "action must have length 13, got 2");
  json bad = zeros();
  bad[4] = "a";
  CHECK(call(s, {{"op", "step"}, {"action", bad}})["ok"] == false);
  CHECK(call(s, {{"op", "step"}, {"action", zeros()}})["ok"] == true);
  CHECK_FALSE(s.closed());
  CHECK(call(s, {{"op", "close"}})["ok"] == true);
  CHECK(s.closed());
}

TEST_CASE("wire episodes match the in-process environment") {
  WireSession s(default_model());
  const json r0 = call(s, kFixedReset);
  REQUIRE(r0["ok"] == true);

  Environment env(default_model());
  EpisodeConfig cfg;
  cfg.box.size = Vec3(0.4, 0.4, 0.7);
  cfg.box.mass = 5.0;
  cfg.randomize_pose = false;
  cfg.offset_x = 0.02;
  cfg.yaw = 0.1;
  const Observation obs = env.reset(cfg, 5);
  CHECK(r0["obs"].get<std::vector<double>>() == std::vector<double>(obs.normalized.begin(), obs.normalized.end()));
  CHECK(r0["info"]["step"] == 0);

  for (int i = 0; i < 25; ++i) {
    const ActionVector ref = env.reference();
    CHECK(r0["info"]["reference"].size() == 13);
    const json r = call(s, {{"op", "step"}, {"action", std::vector<double>(ref.begin(), ref.end())}});
    const StepResult e = env.step(ref);
    REQUIRE(r["ok"] == true);
    CHECK(r["obs"].get<std::vector<double>>() ==
          std::vector<double>(e.observation.normalized.begin(), e.observation.normalized.end()));
    CHECK(r["reward"].get<double>() == e.reward);
    CHECK(r["terminated"] == e.terminated);
    CHECK(r["truncated"] == e.truncated);
    CHECK(r["info"]["step"] == i + 1);
    CHECK(r["info"]["contacts"] == e.info.contacts);
    CHECK(r["info"]["phase"] == phase_name(e.info.phase));
  }
}

TEST_CASE("truncation and perturbation through the wire") {
  WireSession s(default_model());
  json reset = kFixedReset;
  reset["config"]["max_steps"] = 3;
  reset["config"]["perturb"] = {{"onset", 0.05}, {"on", 0.05}, {"off", 0.05}};
  REQUIRE(call(s, reset)["ok"] == true);
  std::vector<bool> perturbed;
  json last;
  for (int i = 0; i < 3; ++i) {
    last = call(s, {{"op", "step"}, {"action", zeros()}});
    perturbed.push_back(last["info"]["perturbed"].get<bool>());
  }
  CHECK(perturbed == std::vector<bool>{false, true, false});
  CHECK(last["truncated"] == true);
  CHECK(last["info"]["outcome"] == "slip");
  CHECK(call(s, {{"op", "step"}, {"action", zeros()}})["error"] == "episode is over; reset required");
}

TEST_CASE("conformance transcript replays byte for byte") {
  std::ifstream in(std::string(SOFTCHAIN_TEST_DATA) + "/wire_transcript.txt");
  REQUIRE(in);
  WireSession s(default_model());
  std::string line, pending;
  int exchanges = 0;
  while (std::getline(in, line)) {
    if (line.rfind("> ", 0) == 0) {
      pending = s.handle(line.substr(2));
    } else {
      REQUIRE(line.rfind("< ", 0) == 0);
      CHECK(pending == line.substr(2));
      ++exchanges;
    }
  }
  CHECK(exchanges == 16);
  CHECK(s.closed());
}

TEST_CASE("stream transport stops at close") {
  std::istringstream in("{\"op\":\"hello\"}\r\n{\"op\":\"close\"}\n{\"op\":\"hello\"}\n");
  std::ostringstream out;
  serve_stream(default_model(), in, out);
  CHECK(out.str() == "{\"act_dim\":13,\"obs_dim\":93,\"ok\":true,\"version\":1}\n{\"ok\":true}\n");
}

TEST_CASE("tcp round trip") {
  TcpServer server(default_model());
  const int port = server.listen(0, "127.0.0.1");
  REQUIRE(port > 0);
  std::thread loop([&] { server.run(); });
  {
    TcpClient a("127.0.0.1", port), b("127.0.0.1", port);
    WireSession local(default_model());
    CHECK(a.request("{\"op\":\"hello\"}") == local.handle("{\"op\":\"hello\"}"));
    // two clients hold independent sessions
    CHECK(json::parse(a.request(kFixedReset.dump()))["ok"] == true);
    local.handle(kFixedReset.dump());
    CHECK(json::parse(b.request(json{{"op", "step"}, {"action", zeros()}}.dump()))["error"] == "step before reset");
    const std::string step = json{{"op", "step"}, {"action", zeros()}}.dump();
    CHECK(a.request(step) == local.handle(step));
    CHECK(a.request("{\"op\":\"close\"}") == "{\"ok\":true}");
  }
  server.stop();
  loop.join();
  CHECK_THROWS(TcpClient("127.0.0.1", 0));
}
