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

// Discrete-event engine, scenario files and metrics logs.

#ifndef CWORM_SIM_H_
#define CWORM_SIM_H_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cworm/classad.h"
#include "cworm/contract.h"
#include "cworm/migrator.h"
#include "cworm/resources.h"
#include "cworm/worm.h"

namespace cworm {

// -- Scenarios ---------------------------------------------------------------------

inline constexpr int kScenarioVersion = 1;

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class EventKind {
  kStartRun,
  kInjectLoad,
  kRegisterClique,
  kDeregisterClique,
  kKillSource,
  kPurgeDeadline,
  kManualMigrate,
  kSetContract,
  kAnnotation,
};

const char* to_string(EventKind kind);

struct ScenarioEvent {
  SimTime time = 0;
  EventKind kind = EventKind::kAnnotation;
  std::vector<std::string> args;
  int line = 0;
};

struct CliqueDef {
  Clique clique;
  double ttl_seconds = 1e9;
  bool registered_at_start = true;
};

struct Workload {
  std::array<int, 3> dims{8, 8, 8};
  double alpha = 0.1;
  std::uint64_t seed = 42;
  // 0: run until the scenario ends.
  std::uint64_t iterations = 0;
  // 0: no backups.
  double backup_interval = 0;
  int backup_retention = 2;
  bool migrate_on_better = false;
};

struct Scenario {
  int version = kScenarioVersion;
  std::string name;
  std::string run_id = "run";
  SimTime end_time = 0;
  // Wall-clock label of t = 0 ("09:00"); event times may then be written as
  // HH:MM[:SS].
  std::optional<std::string> clock_origin;
  ContractParams contract;
  Workload workload;
  TransferModel transfer;
  double evacuation_margin = 10;
  std::vector<CliqueDef> cliques;
  std::string request_text;
  classad::ClassAd request;
  std::vector<ScenarioEvent> events;
};

// Parses and validates; nothing is executed. `base_dir` resolves relative
// request files.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".");
Scenario load_scenario(const std::filesystem::path& path);

// -- Logs ----------------------------------------------------------------------------

struct MetricsRecord {
  std::uint64_t seq = 0;
  SimTime time = 0;
  std::int64_t quantum = 0;
  std::string clique;
  // Set on quantum records, empty on lifecycle records.
  std::optional<double> rate;
  std::optional<double> average;
  std::optional<double> degradation;
  bool violation = false;
  bool trigger = false;
  // The run starts migrating right after this quantum.
  bool migration = false;
  std::string event;
  std::string detail;

  bool is_quantum() const { return event.empty(); }
  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

std::string to_json_line(const MetricsRecord& record);
// Throws std::invalid_argument on malformed input.
MetricsRecord metrics_from_json(const std::string& line);
std::vector<MetricsRecord> read_metrics_log(const std::filesystem::path& path);

struct LogEvent {
  SimTime time = 0;
  std::string kind;
  std::string detail;

  friend bool operator==(const LogEvent&, const LogEvent&) = default;
};

// Tab-separated: time, quantum, clique, rate, violation, migration. One row
// per quantum record.
std::string export_plot_data(const std::vector<MetricsRecord>& metrics);

// "09:00" + 1800 s -> "09:30:00".
std::string clock_label(const std::string& origin, SimTime t);

// -- Control commands ------------------------------------------------------------------

struct SetContractCommand {
  std::optional<double> quantum_seconds;
  std::optional<double> degradation_threshold;
  std::optional<int> consecutive_required;
};
struct MigrateCommand {
  std::optional<std::string> target;
};
struct PauseCommand {};
struct ResumeCommand {};

using ControlCommand = std::variant<SetContractCommand, MigrateCommand, PauseCommand, ResumeCommand>;

struct CommandAck {
  bool accepted = false;
  int http_status = 200;
  std::string message;
  std::uint64_t id = 0;
};

struct StatusSnapshot {
  bool has_run = false;
  std::string run_id;
  std::string status;
  std::string clique;
  std::uint64_t iteration = 0;
  ContractParams contract;
  std::int64_t consecutive_violations = 0;
  std::int64_t quantum = 0;
  bool paused = false;
  SimTime time = 0;
};

struct ResourceRow {
  std::string name;
  std::int64_t cpu_count = 0;
  std::int64_t min_mem_size = 0;
  double max_cpu_load = 0;
  double rank = 0;
  bool matches = false;
  bool current = false;
};

struct RunResult {
  std::vector<MetricsRecord> metrics;
  std::vector<LogEvent> events;
  StatusSnapshot final_status;
  SolverState final_state;
  std::vector<std::string> alerts;
};

// -- Engine ----------------------------------------------------------------------------

// Owns the clock and the event queue. Thread-safe: control handlers may call
// submit() and the read accessors while another thread drives run_until().
class Engine {
 public:
  // Checkpoints and staging areas live under `out_dir`.
  Engine(Scenario scenario, std::filesystem::path out_dir);

  // Processes every queued event with time <= t (capped at the end time).
  void run_until(SimTime t);
  void run() { run_until(scenario_.end_time); }
  bool finished() const;
  SimTime now() const;
  SimTime end_time() const { return scenario_.end_time; }

  CommandAck submit(const ControlCommand& command);

  StatusSnapshot status() const;
  std::vector<MetricsRecord> metrics_since(std::uint64_t since) const;
  std::vector<LogEvent> events() const;
  std::vector<ResourceRow> resources() const;
  RunResult result() const;

  // metrics.log, events.log and plot.tsv.
  void write_logs(const std::filesystem::path& dir) const;

 private:
  enum class Phase { kIdle, kRunning, kMigrating, kHibernating, kLost, kDone };

  struct Scripted {
    std::size_t index;
  };
  struct QuantumEnd {
    std::uint64_t epoch;
  };
  struct Resume {
    std::uint64_t epoch;
    std::string target;
    SolverState state;
  };
  struct Flush {
    LogEvent event;
  };
  struct Evacuate {};
  struct ApplyCommands {};
  using Payload = std::variant<Scripted, QuantumEnd, Resume, Flush, Evacuate, ApplyCommands>;

  struct Item {
    SimTime time;
    std::uint64_t seq;
    Payload payload;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.time > b.time || (a.time == b.time && a.seq > b.seq);
    }
  };

  void schedule(SimTime t, Payload p);
  void process(Item& item);
  void handle_scripted(const ScenarioEvent& e);
  void start_run();
  void start_quantum();
  void end_quantum();
  void apply_commands();
  bool apply_migrate(const MigrateCommand& c, std::uint64_t id);
  void kill_source(bool graceful);
  bool try_migrate(MigrationTrigger trigger, const std::optional<std::string>& target, bool require_better);
  void begin_migration(MigrationPlan plan, const std::optional<SolverState>& fresh);
  void watch();
  void apply_load(const std::string& clique, const std::string& machine, double delta);
  void hibernate_with_fresh_checkpoint(const std::string& site, const std::string& reason);

  void emit(SimTime t, const std::string& kind, const std::string& detail);
  void sync_migrator();
  std::optional<std::string> validate_target(const std::string& target) const;
  const Clique& catalog(const std::string& name) const;
  CommandAck submit_locked(const ControlCommand& command);
  StatusSnapshot status_locked() const;
  static const char* phase_name(Phase p);

  Scenario scenario_;
  std::filesystem::path out_dir_;
  mutable std::mutex mu_;

  std::map<std::string, CliqueDef> catalog_;
  Directory dir_;
  Migrator mig_;
  std::string token_;
  std::size_t synced_events_ = 0;

  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::uint64_t seq_ = 0;
  SimTime now_ = 0;

  Phase phase_ = Phase::kIdle;
  SolverState state_;
  std::string clique_;
  std::optional<ContractMonitor> monitor_;
  ContractParams params_;
  std::optional<BackupScheduler> backups_;
  std::uint64_t epoch_ = 0;
  std::int64_t quantum_index_ = 0;
  SimTime quantum_start_ = 0;
  double quantum_len_ = 0;
  double quantum_elapsed_ = 0;
  std::int64_t planned_ = 0;
  std::int64_t full_planned_ = 0;
  bool paused_ = false;
  bool better_check_ = false;
  std::uint64_t watched_version_ = 0;

  std::deque<std::pair<std::uint64_t, ControlCommand>> pending_;
  std::uint64_t next_command_id_ = 1;

  std::vector<MetricsRecord> metrics_;
  std::vector<LogEvent> events_;
};

RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

}  // namespace cworm

#endif  // CWORM_SIM_H_
