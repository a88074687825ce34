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

// cworm: run scenarios, match ads, replay metrics logs.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cworm/classad.h"
#include "cworm/control.h"
#include "cworm/selector.h"
#include "cworm/sim.h"

namespace fs = std::filesystem;
using namespace cworm;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void summarize(const RunResult& r) {
  int quanta = 0, violations = 0;
  for (const auto& m : r.metrics) {
    if (!m.is_quantum()) continue;
    ++quanta;
    violations += m.violation;
  }
  std::cout << "status:     " << (r.final_status.has_run ? r.final_status.status : "NO RUN") << "\n"
            << "iteration:  " << r.final_state.iteration << "\n"
            << "quanta:     " << quanta << " (" << violations << " violating)\n";
  for (const auto& e : r.events)
    if (e.kind == "RELOCATED" || e.kind == "RECOVERED" || e.kind == "HIBERNATED" || e.kind == "EVACUATED")
      std::cout << "  t=" << e.time << " " << e.kind << " " << e.detail << "\n";
  for (const auto& a : r.alerts) std::cout << "alert: " << a << "\n";
}

int cmd_run(const fs::path& scenario_path, fs::path out, bool live, const std::string& host, int port,
            double time_scale, bool hold) {
  Scenario s = load_scenario(scenario_path);
  if (out.empty()) out = fs::path("out") / (s.name.empty() ? scenario_path.stem().string() : s.name);
  Engine engine(s, out);
  if (!live) {
    engine.run();
  } else {
    ControlPlane cp(engine);
    int bound = cp.start(host, port);
    std::cout << "serving http://" << host << ":" << bound << "  (time scale " << time_scale << "x)" << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    auto t0 = std::chrono::steady_clock::now();
    while (!g_stop && engine.now() < engine.end_time()) {
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      engine.run_until(wall * time_scale);
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    if (hold && !g_stop) {
      std::cout << "run finished; serving until interrupted" << std::endl;
      wait_for_signal();
    }
    cp.stop();
  }
  engine.write_logs(out);
  summarize(engine.result());
  std::cout << "logs:       " << (out / "metrics.log").string() << ", " << (out / "events.log").string() << ", "
            << (out / "plot.tsv").string() << "\n";
  return 0;
}

int cmd_match(const fs::path& request_path, const std::vector<fs::path>& ads) {
  auto request = classad::parse_ad(read_file(request_path));
  std::optional<classad::MatchResult> best;
  for (const auto& p : ads) {
    auto ad = classad::parse_ad(read_file(p));
    auto name_v = classad::evaluate_attribute("Name", ad, {});
    std::string name = name_v.is_string() ? name_v.as_string() : p.stem().string();
    auto m = classad::match(request, ad, name);
    if (m) {
      std::cout << name << "\tmatch\trank=" << m->rank << "\n";
      if (!best || m->rank > best->rank || (m->rank == best->rank && name < best->resource_name)) best = m;
    } else {
      std::cout << name << "\tno-match\n";
    }
  }
  SelectionResponse r;
  if (best)
    r.outcome = SelectionSuccess{best->resource_name, {}, best->rank};
  else
    r.outcome = SelectionFailure{kNoMatchReason};
  std::cout << format_response(r) << "\n";
  return best ? 0 : 1;
}

int cmd_replay(const fs::path& log, const std::string& host, int port, const fs::path& plot) {
  auto records = read_metrics_log(log);
  if (!plot.empty()) {
    std::ofstream(plot, std::ios::binary) << export_plot_data(records);
    std::cout << "wrote " << plot.string() << "\n";
  }
  std::size_t quanta = 0;
  for (const auto& r : records) quanta += r.is_quantum();
  std::cout << records.size() << " records, " << quanta << " quanta\n";
  if (port >= 0) {
    ControlPlane cp(std::move(records));
    int bound = cp.start(host, port);
    std::cout << "serving read-only replay on http://" << host << ":" << bound << std::endl;
    wait_for_signal();
    cp.stop();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cactus Worm testbed: migration simulator, matchmaker and control plane"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario and write metrics.log, events.log and plot.tsv");
  fs::path scenario, out;
  bool live = false, hold = false;
  std::string host = "127.0.0.1";
  int port = 8080;
  double time_scale = 10.0;
  run->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (default out/<name>)");
  run->add_flag("--live", live, "Advance the clock in real time and serve the control API");
  run->add_option("--host", host, "Bind address for --live");
  run->add_option("--port", port, "Port for --live (0 picks a free port)");
  run->add_option("--time-scale", time_scale, "Simulated seconds per wall-clock second")->check(CLI::PositiveNumber);
  run->add_flag("--hold", hold, "Keep serving after the run ends, until interrupted");

  auto* match = app.add_subcommand("match", "Match a request ad against resource ads");
  fs::path request;
  std::vector<fs::path> ads;
  match->add_option("request", request, "Request ad")->required()->check(CLI::ExistingFile);
  match->add_option("ads", ads, "Resource ads")->required()->check(CLI::ExistingFile);

  auto* replay = app.add_subcommand("replay", "Inspect or serve a recorded metrics log");
  fs::path log, plot;
  int serve = -1;
  replay->add_option("log", log, "metrics.log")->required()->check(CLI::ExistingFile);
  replay->add_option("--serve", serve, "Serve the read-only control API on this port");
  replay->add_option("--host", host, "Bind address for --serve");
  replay->add_option("--plot", plot, "Write tab-separated plot data");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(scenario, out, live, host, port, time_scale, hold);
    if (*match) return cmd_match(request, ads);
    return cmd_replay(log, host, serve, plot);
  } catch (const std::exception& e) {
    std::cerr << "cworm: " << e.what() << "\n";
    return 2;
  }
}
