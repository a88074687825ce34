// Copyright 2026 The Cactus Worm Testbed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cworm/control.h"

#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace cworm;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

Scenario fig5() { return load_scenario(fs::path(CWORM_SOURCE_DIR) / "scenarios" / "fig5.scenario"); }

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cworm_control_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("status before the run starts is empty") {
  Engine e(fig5(), fresh_dir("empty"));
  ControlPlane cp(e);
  auto r = cp.handle("GET", "/status", "", "");
  CHECK(r.status == 200);
  auto j = json::parse(r.body);
  CHECK(j["mode"] == "live");
  CHECK_FALSE(j.contains("runId"));
  CHECK(cp.handle("POST", "/migrate", "", "{}").status == 409);
}

TEST_CASE("status, metrics and resources over HTTP") {
  Engine e(fig5(), fresh_dir("http"));
  e.run_until(90);
  ControlPlane cp(e);
  int port = cp.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto st = cli.Get("/status");
  REQUIRE(st);
  CHECK(st->status == 200);
  CHECK(st->get_header_value("Content-Type") == "application/json");
  auto j = json::parse(st->body);
  CHECK(j["runId"] == "fig5");
  CHECK(j["status"] == "RUNNING");
  CHECK(j["quantum"] == 9);
  CHECK(j["consecutiveViolations"] == 2);
  CHECK(j["contract"]["threshold"] == 0.1);
  CHECK(j["contract"]["consecutive"] == 3);

  auto all = json::parse(cli.Get("/metrics")->body);
  auto tail = json::parse(cli.Get("/metrics?since=3")->body);
  REQUIRE(all.is_array());
  CHECK(tail.size() == all.size() - 3);
  CHECK(tail[0] == all[3]);
  CHECK(json::parse(cli.Get("/metrics?since=" + std::to_string(all.size()))->body).empty());
  CHECK(cli.Get("/metrics?since=-1")->status == 400);
  CHECK(cli.Get("/metrics?since=abc")->status == 400);

  auto res = json::parse(cli.Get("/resources")->body);
  REQUIRE(res.size() == 2);
  CHECK(res[0]["name"] == "uc");
  CHECK(res[0]["current"] == true);
  CHECK(res[0]["rank"] == 4000.0);
  CHECK(res[0]["CPUCount"] == 16);
  CHECK(res[1]["name"] == "uiuc");
  CHECK(res[1]["rank"] == 5120.0);
  CHECK(res[1]["matches"] == true);
  CHECK(res[1]["maxCPULoad"] == 0.25);
  cp.stop();
}

TEST_CASE("POST /contract validates and changes the next verdict") {
  Engine e(fig5(), fresh_dir("contract"));
  e.run_until(75);
  ControlPlane cp(e);
  int port = cp.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  auto bad = cli.Post("/contract", R"({"threshold": 1.5})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).contains("error"));
  CHECK(cli.Post("/contract", "not json", "application/json")->status == 400);
  CHECK(cli.Post("/contract", R"({"color": 1})", "application/json")->status == 400);
  CHECK(cli.Post("/contract", R"({"consecutive": 2.5})", "application/json")->status == 400);
  CHECK(cli.Post("/contract", "[]", "application/json")->status == 400);
  auto ok = cli.Post("/contract", R"({"threshold": 0.6})", "application/json");
  CHECK(ok->status == 202);
  CHECK(json::parse(ok->body)["accepted"] == true);
  cp.stop();
  e.run();
  auto m = e.metrics_since(0);
  std::vector<bool> v;
  for (const auto& r : m)
    if (r.is_quantum()) v.push_back(r.violation);
  CHECK(v[7]);
  for (std::size_t i = 8; i < v.size(); ++i) CHECK_FALSE(v[i]);
}

TEST_CASE("POST /migrate with an explicit target gives a MANUAL migration") {
  Engine e(fig5(), fresh_dir("migrate"));
  e.run_until(25);
  ControlPlane cp(e);
  int port = cp.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  CHECK(cli.Post("/migrate", R"({"target": "mars"})", "application/json")->status == 404);
  CHECK(cli.Post("/migrate", R"({"target": 5})", "application/json")->status == 400);
  CHECK(cli.Post("/migrate", R"({"target": "uiuc"})", "application/json")->status == 202);
  cp.stop();
  e.run();
  bool manual = false, relocated = false;
  for (const auto& ev : e.events()) {
    manual |= ev.kind == "MIGRATION_START" && ev.detail == "MANUAL uc -> uiuc";
    relocated |= ev.kind == "RELOCATED";
  }
  CHECK(manual);
  CHECK(relocated);
}

TEST_CASE("concurrent commands while the clock advances are each applied once") {
  Engine e(fig5(), fresh_dir("concurrent"));
  e.run_until(1);
  ControlPlane cp(e);
  int port = cp.start("127.0.0.1", 0);
  std::atomic<int> accepted{0};
  std::vector<std::thread> clients;
  for (int c = 0; c < 4; ++c) {
    clients.emplace_back([&, c] {
      httplib::Client cli("127.0.0.1", port);
      for (int i = 0; i < 5; ++i) {
        auto r = cli.Post("/contract", json{{"threshold", 0.2 + 0.01 * c}}.dump(), "application/json");
        if (r && r->status == 202) ++accepted;
      }
    });
  }
  for (double t = 1; t <= 60; t += 1) e.run_until(t);
  for (auto& t : clients) t.join();
  cp.stop();
  e.run();
  int applied = 0;
  for (const auto& ev : e.events()) applied += ev.kind == "COMMAND_APPLIED";
  CHECK(accepted == 20);
  CHECK(applied == 20);
}

TEST_CASE("pause and resume endpoints") {
  Engine e(fig5(), fresh_dir("pause"));
  e.run_until(5);
  ControlPlane cp(e);
  CHECK(cp.handle("POST", "/pause", "", "").status == 202);
  CHECK(cp.handle("POST", "/pause", "", R"({"x":1})").status == 400);
  e.run_until(50);
  CHECK(json::parse(cp.handle("GET", "/status", "", "").body)["paused"] == true);
  CHECK(cp.handle("POST", "/resume", "", "").status == 202);
  e.run_until(70);
  auto j = json::parse(cp.handle("GET", "/status", "", "").body);
  CHECK(j["paused"] == false);
  CHECK(j["quantum"] == 3);
}

TEST_CASE("replay serves a recorded log read-only") {
  auto dir = fresh_dir("replay");
  Engine e(fig5(), dir);
  e.run();
  e.write_logs(dir);
  ControlPlane cp(read_metrics_log(dir / "metrics.log"));
  CHECK_FALSE(cp.live());
  int port = cp.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  auto m = json::parse(cli.Get("/metrics")->body);
  CHECK(m.size() == e.metrics_since(0).size());
  int migration_after = -1;
  for (const auto& r : m)
    if (r["migration"] == true) migration_after = r["quantum"];
  CHECK(migration_after == 10);
  CHECK(json::parse(cli.Get("/status")->body)["mode"] == "replay");
  CHECK(json::parse(cli.Get("/resources")->body).empty());
  for (const char* p : {"/contract", "/migrate", "/pause", "/resume"})
    CHECK(cli.Post(p, "{}", "application/json")->status == 409);
  CHECK(cli.Get("/nothing")->status == 404);
  cp.stop();
}

TEST_CASE("unknown paths and methods") {
  ControlPlane cp(std::vector<MetricsRecord>{});
  CHECK(cp.handle("GET", "/nope", "", "").status == 404);
  CHECK(cp.handle("DELETE", "/status", "", "").status == 405);
  CHECK(cp.handle("POST", "/status", "", "").status == 404);
  CHECK(json::parse(cp.handle("GET", "/metrics", "", "").body).empty());
}
