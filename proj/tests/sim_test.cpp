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

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "cworm/sim.h"
#include "doctest.h"
#include "oracles.h"

using namespace cworm;
namespace fs = std::filesystem;

namespace {

fs::path scenario_file(const std::string& name) {
  return fs::path(CWORM_SOURCE_DIR) / "scenarios" / (name + ".scenario");
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cworm_sim_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<MetricsRecord> quanta(const std::vector<MetricsRecord>& m) {
  std::vector<MetricsRecord> out;
  std::copy_if(m.begin(), m.end(), std::back_inserter(out), [](const MetricsRecord& r) { return r.is_quantum(); });
  return out;
}

std::vector<LogEvent> of_kind(const std::vector<LogEvent>& events, const std::string& kind) {
  std::vector<LogEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out), [&](const LogEvent& e) { return e.kind == kind; });
  return out;
}

const std::string kRequest = R"(
[request]
ad = <<END
[ requirements = other.opSys == "LINUX"; Rank = other.CPUCount; ]
END
)";

const std::string kMinimal = R"(version = 1
end = 100
[contract]
quantum = 10
[clique a]
wan = 1
machine = name=a0 domain=a.org os=LINUX cpus=4 mhz=100 mem=1G load=0 rate=1
)" + kRequest;

}  // namespace

TEST_CASE("scenario parser accepts the minimal file and adds an implicit start") {
  auto s = parse_scenario(kMinimal);
  CHECK(s.end_time == 100);
  REQUIRE(s.events.size() == 1);
  CHECK(s.events[0].kind == EventKind::kStartRun);
  CHECK(s.events[0].time == 0);
  REQUIRE(s.cliques.size() == 1);
  CHECK(s.cliques[0].clique.members[0].mem_bytes == 1024LL * 1024 * 1024);
}

TEST_CASE("scenario parser rejects malformed input with a line number") {
  struct Case {
    std::string text;
    std::string fragment;
    int line;
  };
  std::vector<Case> cases = {
      {"end = 10\n" + kRequest, "missing version", 0},
      {"version = 2\nend = 10\n" + kRequest, "version", 1},
      {"version = 1\nend = 10\n[bogus]\n" + kRequest, "unknown section", 3},
      {"version = 1\nend = 10\nend = 20\n" + kRequest, "duplicate key", 3},
      {kMinimal + "[events]\nat 5 explode\n", "unknown event kind", 14},
      {kMinimal + "[events]\nat 500 annotation late\n", "after end", 14},
      {kMinimal + "[events]\nat 5 inject_load a nope 1\n", "unknown machine", 14},
      {kMinimal + "[events]\nat 5 register_clique zz\n", "unknown clique", 14},
      {kMinimal + "[events]\nat 09:10 annotation x\n", "origin", 14},
      {kMinimal + "[events]\nat 5 kill_source sideways\n", "kill_source", 14},
      {kMinimal + "[events]\nat 1 start_run\nat 2 start_run\n", "start_run", 15},
      {kMinimal + "[events]\nat 5 set_contract threshold=1.5\n", "threshold", 14},
  };
  for (const auto& c : cases) {
    CAPTURE(c.text);
    try {
      parse_scenario(c.text);
      FAIL("accepted");
    } catch (const ScenarioError& e) {
      CHECK(std::string(e.what()).find(c.fragment) != std::string::npos);
      CHECK(e.line() == c.line);
    }
  }
}

TEST_CASE("clock times resolve against the origin") {
  auto s = parse_scenario("version = 1\norigin = 09:00\nend = 10:30\n" + std::string(R"(
[clique a]
machine = name=a0 domain=a.org os=LINUX cpus=4 mhz=100 mem=1G load=0 rate=1
)") + kRequest + "[events]\nat 09:50 annotation hello world\n");
  CHECK(s.end_time == 5400);
  REQUIRE(s.events.size() == 2);
  CHECK(s.events[1].time == 3000);
  CHECK(s.events[1].args[0] == "hello world");
  CHECK(clock_label("09:00", 1830.12) == "09:30:30");
  CHECK(clock_label("23:30", 3600) == "24:30:00");
}

TEST_CASE("fig5: violations at 8, 9, 10 and one migration after 10") {
  auto s = load_scenario(scenario_file("fig5"));
  auto r = run_scenario(s, fresh_dir("fig5"));
  auto q = quanta(r.metrics);
  REQUIRE(q.size() > 12);
  for (std::size_t i = 0; i < 7; ++i) CHECK_FALSE(q[i].violation);
  for (std::size_t i = 7; i < 10; ++i) CHECK(q[i].violation);
  for (std::size_t i = 10; i < q.size(); ++i) CHECK_FALSE(q[i].violation);
  int migrations = 0;
  for (const auto& m : q) migrations += m.migration;
  CHECK(migrations == 1);
  CHECK(q[9].migration);
  CHECK(q[9].quantum == 10);
  const double pre = *q[0].rate, degraded = *q[8].rate, post = *q[10].rate;
  CHECK(post > degraded);
  CHECK(post < pre);
  CHECK(q[10].clique == "uiuc");
  auto rel = of_kind(r.events, "RELOCATED");
  REQUIRE(rel.size() == 1);
  CHECK(rel[0].time == doctest::Approx(100 + 96.0 / 50 + 2 * (96 + 2) + 5).epsilon(1e-12));
}

TEST_CASE("fig5: status at quantum 9 shows two consecutive violations") {
  Engine e(load_scenario(scenario_file("fig5")), fresh_dir("fig5_status"));
  StatusSnapshot before = e.status();
  CHECK_FALSE(before.has_run);
  e.run_until(90);
  auto s = e.status();
  CHECK(s.has_run);
  CHECK(s.status == "RUNNING");
  CHECK(s.quantum == 9);
  CHECK(s.consecutive_violations == 2);
  CHECK(s.clique == "uc");
  e.run();
  CHECK(e.status().clique == "uiuc");
}

TEST_CASE("runs are deterministic down to the log bytes") {
  for (const char* name : {"fig5", "table1", "crash"}) {
    CAPTURE(name);
    auto s = load_scenario(scenario_file(name));
    std::string logs[2];
    for (int k = 0; k < 2; ++k) {
      auto dir = fresh_dir(std::string(name) + "_det" + std::to_string(k));
      Engine e(s, dir);
      e.run();
      e.write_logs(dir);
      logs[k] = slurp(dir / "metrics.log") + slurp(dir / "events.log") + slurp(dir / "plot.tsv");
      CHECK(logs[k].find(dir.string()) == std::string::npos);
    }
    CHECK(logs[0] == logs[1]);
  }
}

TEST_CASE("metrics are ordered, gap-free and never go back in time") {
  for (const char* name : {"fig5", "table1", "hibernate", "crash", "purge"}) {
    CAPTURE(name);
    auto r = run_scenario(load_scenario(scenario_file(name)), fresh_dir(std::string(name) + "_mono"));
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
      CHECK(r.metrics[i].seq == i);
      if (i) CHECK(r.metrics[i].time >= r.metrics[i - 1].time);
    }
    for (std::size_t i = 1; i < r.events.size(); ++i) CHECK(r.events[i].time >= r.events[i - 1].time);
    std::int64_t last = 0;
    for (const auto& m : quanta(r.metrics)) {
      CHECK(m.quantum == last + 1);
      last = m.quantum;
    }
  }
}

TEST_CASE("a scenario without events still runs") {
  auto r = run_scenario(parse_scenario(kMinimal), fresh_dir("minimal"));
  CHECK(quanta(r.metrics).size() == 10);
  CHECK(r.final_state.iteration == 100);
  CHECK(r.final_status.status == "RUNNING");
}

TEST_CASE("metrics_since returns exact suffixes") {
  Engine e(load_scenario(scenario_file("fig5")), fresh_dir("since"));
  e.run();
  auto all = e.metrics_since(0);
  CHECK(e.metrics_since(all.size()).empty());
  CHECK(e.metrics_since(all.size() + 7).empty());
  auto tail = e.metrics_since(5);
  REQUIRE(tail.size() == all.size() - 5);
  CHECK(tail.front() == all[5]);
}

TEST_CASE("plot export has one row per quantum") {
  auto r = run_scenario(load_scenario(scenario_file("fig5")), fresh_dir("plot"));
  auto tsv = export_plot_data(r.metrics);
  std::istringstream in(tsv);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "time\tquantum\tclique\trate\tviolation\tmigration");
  std::vector<std::string> rows;
  while (std::getline(in, row)) rows.push_back(row);
  CHECK(rows.size() == quanta(r.metrics).size());
  CHECK(rows[0] == "10\t1\tuc\t10\t0\t0");
  CHECK(rows[7] == "80\t8\tuc\t5\t1\t0");
  CHECK(rows[9] == "100\t10\tuc\t5\t1\t1");
  CHECK(rows[10] == "312.92\t11\tuiuc\t6.4\t0\t0");
  CHECK(export_plot_data({}) == header + "\n");
}

TEST_CASE("metrics JSON round-trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1000);
  for (int i = 0; i < 200; ++i) {
    MetricsRecord r;
    r.seq = rng() % 10000;
    r.time = u(rng);
    r.quantum = static_cast<std::int64_t>(rng() % 100);
    r.clique = i % 3 ? "c" + std::to_string(i) : "";
    if (i % 2) {
      r.rate = u(rng);
      r.average = u(rng);
      r.degradation = u(rng) / 1000;
      r.violation = rng() % 2;
      r.trigger = rng() % 2;
      r.migration = rng() % 2;
    } else {
      r.event = "EV\"" + std::to_string(i);
      r.detail = "detail \\ with\ttabs";
    }
    CHECK(metrics_from_json(to_json_line(r)) == r);
  }
  CHECK_THROWS_AS(metrics_from_json("{"), std::invalid_argument);
  CHECK_THROWS_AS(metrics_from_json("[1,2]"), std::invalid_argument);
  CHECK_THROWS_AS(metrics_from_json(R"({"seq":"x"})"), std::invalid_argument);
}

TEST_CASE("metrics log written to disk reads back") {
  auto dir = fresh_dir("readback");
  Engine e(load_scenario(scenario_file("fig5")), dir);
  e.run();
  e.write_logs(dir);
  CHECK(read_metrics_log(dir / "metrics.log") == e.metrics_since(0));
}

TEST_CASE("table1: upgrade, shutdown hand-off and contract migration") {
  auto r = run_scenario(load_scenario(scenario_file("table1")), fresh_dir("table1"));
  auto starts = of_kind(r.events, "MIGRATION_START");
  REQUIRE(starts.size() == 3);
  CHECK(starts[0].time == 1800);
  CHECK(starts[0].detail == "BETTER_RESOURCE site50 -> cluster200");
  CHECK(starts[1].time == 3000);
  CHECK(starts[1].detail == "SOURCE_SHUTDOWN cluster200 -> grid100");
  CHECK(starts[2].detail == "CONTRACT_VIOLATION grid100 -> site50");
  CHECK(starts[2].time > 4500);
  CHECK(r.final_status.status == "DONE");
  auto done = of_kind(r.events, "DONE");
  REQUIRE(done.size() == 1);
  CHECK(clock_label("09:00", done[0].time) == "10:25:00");
  CHECK(r.final_state.iteration == 21479);
}

TEST_CASE("hibernate: no alternative host, then automatic restart") {
  auto s = load_scenario(scenario_file("hibernate"));
  auto dir = fresh_dir("hibernate");
  Engine e(s, dir);
  e.run_until(200);
  auto st = e.status();
  CHECK(st.status == "HIBERNATING");
  CHECK(st.clique.empty());
  const auto hibernated_at = st.iteration;
  CHECK(hibernated_at == 420);
  CHECK(fs::exists(dir / checkpoint_path(kStoreSite, "hib", hibernated_at)));
  e.run();
  auto r = e.result();
  CHECK(r.final_status.status == "RUNNING");
  CHECK(r.final_status.clique == "beta");
  auto resumed = of_kind(r.events, "RESUMED");
  REQUIRE(resumed.size() == 1);
  CHECK(resumed[0].detail == "beta at iteration 420");
  CHECK(of_kind(r.events, "MIGRATION_START")[0].detail == "BETTER_RESOURCE store -> beta");
}

TEST_CASE("selection failure at start hibernates with an initial checkpoint") {
  auto s = parse_scenario(R"(version = 1
end = 100
run_id = late
[contract]
quantum = 10
[clique a]
registered = no
wan = 1
machine = name=a0 domain=a.org os=LINUX cpus=4 mhz=100 mem=1G load=0 rate=1
)" + kRequest + "[events]\nat 0 start_run\nat 40 register_clique a\n");
  auto dir = fresh_dir("late");
  Engine e(s, dir);
  e.run_until(10);
  CHECK(e.status().status == "HIBERNATING");
  CHECK(fs::exists(dir / checkpoint_path(kStoreSite, "late", 0)));
  e.run();
  CHECK(e.status().status == "RUNNING");
  CHECK(e.status().clique == "a");
}

TEST_CASE("crash after a backup recovers to the uninterrupted final state") {
  auto s = load_scenario(scenario_file("crash"));
  auto r = run_scenario(s, fresh_dir("crash"));
  CHECK(r.final_status.status == "DONE");
  auto rec = of_kind(r.events, "RECOVERED");
  REQUIRE(rec.size() == 1);
  CHECK(of_kind(r.events, "RESUMED")[0].detail == "beta at iteration 50");

  auto initial = make_initial_state(s.workload.dims, s.workload.alpha, s.run_id, s.workload.seed);
  auto expected = oracle::reference_jacobi(initial.field, s.workload.dims, s.workload.alpha, 200);
  CHECK(r.final_state.iteration == 200);
  CHECK(oracle::field_digest(r.final_state.field) == oracle::field_digest(expected));
  CHECK(r.final_state.field == expected);
}

TEST_CASE("purge: evacuation starts at 894 and lands before the deadline") {
  auto dir = fresh_dir("purge");
  auto r = run_scenario(load_scenario(scenario_file("purge")), dir);
  auto start = of_kind(r.events, "EVACUATION_START");
  auto done = of_kind(r.events, "EVACUATED");
  REQUIRE(start.size() == 1);
  REQUIRE(done.size() == 1);
  CHECK(start[0].time == doctest::Approx(1000 - 96 - 10));
  CHECK(start[0].time <= 894);
  CHECK(done[0].time < 1000);
  CHECK(done[0].detail == "store/purge/ckpt-250.cwck");
  CHECK(fs::exists(dir / done[0].detail));
  CHECK(r.alerts.empty());
}

TEST_CASE("threshold change applies from the next quantum") {
  auto s = load_scenario(scenario_file("fig5"));
  Engine e(s, fresh_dir("threshold"));
  e.run_until(75);
  auto ack = e.submit(SetContractCommand{std::nullopt, 0.6, std::nullopt});
  CHECK(ack.accepted);
  CHECK(ack.http_status == 202);
  e.run();
  auto r = e.result();
  auto q = quanta(r.metrics);
  CHECK(q[7].violation);
  for (std::size_t i = 8; i < q.size(); ++i) CHECK_FALSE(q[i].violation);
  CHECK(of_kind(r.events, "COMMAND_APPLIED").size() == 1);
  CHECK(of_kind(r.events, "COMMAND_APPLIED")[0].time == 80);
  CHECK(of_kind(r.events, "MIGRATION_START").empty());
  CHECK(r.final_status.contract.degradation_threshold == 0.6);
}

TEST_CASE("invalid contract changes are rejected and the run continues") {
  Engine e(load_scenario(scenario_file("fig5")), fresh_dir("badcontract"));
  CHECK(e.submit(SetContractCommand{std::nullopt, 0.2, std::nullopt}).http_status == 409);
  e.run_until(35);
  CHECK(e.submit(SetContractCommand{std::nullopt, 1.5, std::nullopt}).http_status == 400);
  CHECK(e.submit(SetContractCommand{-1.0, std::nullopt, std::nullopt}).http_status == 400);
  CHECK(e.submit(SetContractCommand{}).http_status == 400);
  e.run();
  CHECK(of_kind(e.events(), "COMMAND_APPLIED").empty());
  CHECK(quanta(e.metrics_since(0))[7].violation);
}

TEST_CASE("manual migration to an explicit target") {
  auto s = load_scenario(scenario_file("fig5"));
  Engine e(s, fresh_dir("manual"));
  e.run_until(35);
  CHECK(e.submit(MigrateCommand{"nowhere"}).http_status == 404);
  CHECK(e.submit(MigrateCommand{"uc"}).http_status == 422);
  auto ack = e.submit(MigrateCommand{"uiuc"});
  CHECK(ack.accepted);
  e.run();
  auto r = e.result();
  auto starts = of_kind(r.events, "MIGRATION_START");
  REQUIRE(starts.size() == 1);
  CHECK(starts[0].detail == "MANUAL uc -> uiuc");
  CHECK(starts[0].time == 40);
  CHECK(of_kind(r.events, "RELOCATED").size() == 1);
  CHECK(r.final_status.clique == "uiuc");
}

TEST_CASE("manual migration without a target uses the selector") {
  auto s = parse_scenario(kMinimal);
  Engine lonely(s, fresh_dir("lonely"));
  lonely.run_until(15);
  auto ack = lonely.submit(MigrateCommand{});
  CHECK(ack.http_status == 409);
  lonely.run();
  CHECK(lonely.status().status == "RUNNING");

  Engine e(load_scenario(scenario_file("fig5")), fresh_dir("manual_sel"));
  e.run_until(15);
  CHECK(e.submit(MigrateCommand{}).accepted);
  e.run();
  auto starts = of_kind(e.events(), "MIGRATION_START");
  REQUIRE(starts.size() == 1);
  CHECK(starts[0].detail == "MANUAL uc -> uiuc");
}

TEST_CASE("target that fails the request requirements is rejected") {
  auto s = load_scenario(scenario_file("fig5"));
  auto& uiuc = std::find_if(s.cliques.begin(), s.cliques.end(), [](const CliqueDef& d) {
                 return d.clique.name == "uiuc";
               })->clique;
  for (auto& m : uiuc.members) m.op_sys = "IRIX";
  Engine e(s, fresh_dir("reqfail"));
  e.run_until(15);
  auto ack = e.submit(MigrateCommand{"uiuc"});
  CHECK_FALSE(ack.accepted);
  CHECK(ack.http_status == 422);
  e.run_until(200);
  CHECK(e.status().status == "RUNNING");
  CHECK(e.status().clique == "uc");
}

TEST_CASE("pause holds the run at a boundary and resume continues") {
  Engine e(load_scenario(scenario_file("fig5")), fresh_dir("pause"));
  e.run_until(15);
  CHECK(e.submit(PauseCommand{}).accepted);
  e.run_until(60);
  auto s = e.status();
  CHECK(s.paused);
  CHECK(s.quantum == 2);
  CHECK(s.iteration == 200);
  CHECK(e.submit(ResumeCommand{}).accepted);
  e.run_until(80);
  s = e.status();
  CHECK_FALSE(s.paused);
  CHECK(s.quantum == 4);
  auto applied = of_kind(e.events(), "COMMAND_APPLIED");
  REQUIRE(applied.size() == 2);
  CHECK(applied[0].detail == "#1 pause");
  CHECK(applied[1].detail == "#2 resume");
}

TEST_CASE("every accepted command is applied exactly once") {
  Engine e(load_scenario(scenario_file("fig5")), fresh_dir("once"));
  std::vector<std::uint64_t> ids;
  for (int t = 5; t < 60; t += 7) {
    e.run_until(t);
    auto ack = e.submit(SetContractCommand{std::nullopt, 0.1 + t / 1000.0, std::nullopt});
    REQUIRE(ack.accepted);
    ids.push_back(ack.id);
  }
  e.run();
  auto applied = of_kind(e.events(), "COMMAND_APPLIED");
  REQUIRE(applied.size() == ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    CHECK(applied[i].detail.rfind("#" + std::to_string(ids[i]) + " ", 0) == 0);
  for (const auto& a : applied) CHECK(std::fmod(a.time, 10.0) == 0);
}
