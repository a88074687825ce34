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

// External migration service: tracks runs and their checkpoints, stages
// checkpoints between sites, restarts, hibernates and evacuates.

#ifndef CWORM_MIGRATOR_H_
#define CWORM_MIGRATOR_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cworm/worm.h"

namespace cworm {

inline constexpr const char* kStoreSite = "store";
inline constexpr double kBytesPerMB = 1024.0 * 1024.0;

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MigratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Files under a root directory, addressed by relative path. Every read and
// every write is one disk touch.
class Storage {
 public:
  // Called before each operation with ("read" | "write", path); throwing
  // from it injects a failure.
  using FaultHook = std::function<void(const std::string& op, const std::string& path)>;

  explicit Storage(std::filesystem::path root);

  void write(const std::string& path, std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> read(const std::string& path);
  bool exists(const std::string& path) const;
  void remove(const std::string& path);
  std::uint64_t size_of(const std::string& path) const;

  std::uint64_t touches() const { return touches_; }
  const std::filesystem::path& root() const { return root_; }
  void set_fault_hook(FaultHook hook) { fault_ = std::move(hook); }

 private:
  std::filesystem::path root_;
  std::uint64_t touches_ = 0;
  FaultHook fault_;
};

// "sites/<site>/<runId>/ckpt-<iteration>.cwck"; the store uses
// "store/<runId>/ckpt-<iteration>.cwck".
std::string checkpoint_path(const std::string& site, const std::string& run_id, std::uint64_t iteration);

enum class RunStatus { kRunning, kMigrating, kHibernating, kLost, kDone };
enum class MigrationTrigger { kContractViolation, kManual, kBetterResource, kSourceShutdown };

const char* to_string(RunStatus status);
const char* to_string(MigrationTrigger trigger);

struct TrackedCheckpoint {
  CheckpointMeta meta;
  // Relative to the storage root.
  std::string path;
  std::string site;
  std::optional<SimTime> purge_deadline;
  bool safe = false;
};

struct RunEvent {
  SimTime time = 0;
  std::string kind;
  std::string detail;
};

struct SimulationRecord {
  std::string run_id;
  RunStatus status = RunStatus::kRunning;
  bool failed = false;
  std::optional<std::string> current_clique;
  std::vector<TrackedCheckpoint> checkpoints;
  std::vector<std::string> output_files;
  ResourceProfile profile;
  std::string token;
  std::vector<RunEvent> events;

  // Newest checkpoint (by iteration) whose file still exists.
  const TrackedCheckpoint* newest_checkpoint(const Storage& storage) const;
};

struct TransferModel {
  // Keyed by (from site, to site). Missing hops fall back to the WAN
  // bandwidth of the non-store end; direct hops use the smaller of the two.
  std::map<std::pair<std::string, std::string>, double> hop_bandwidth_mbps;
  double per_hop_overhead_seconds = 0;
  double disk_write_mbps = 0;  // 0: checkpoint write costs nothing
  double restart_latency_seconds = 0;
  bool direct = false;
  int max_transfer_attempts = 2;
  // Size used for timing instead of the real file size when set.
  std::optional<std::uint64_t> modeled_checkpoint_bytes;
};

struct Hop {
  std::string from;
  std::string to;
  double bandwidth_mbps = 0;
};

struct MigrationPlan {
  std::string run_id;
  std::optional<std::string> source;
  std::string target;
  // Unset: a fresh checkpoint is taken from the running solver.
  std::optional<TrackedCheckpoint> checkpoint;
  std::vector<Hop> hops;
  MigrationTrigger trigger = MigrationTrigger::kManual;
};

// size/bw + overhead for every hop, plus the write and restart terms.
double modeled_duration(const TransferModel& model, std::uint64_t size_bytes, const std::vector<Hop>& hops,
                        bool fresh_checkpoint);

struct MigrationReport {
  RunStatus outcome = RunStatus::kLost;
  double duration_seconds = 0;
  std::uint64_t disk_touches = 0;
  int transfer_attempts = 0;
  SimTime completed_at = 0;
  std::uint64_t size_bytes = 0;
  // The state the target restarted from.
  std::optional<SolverState> restored;
  std::string detail;
};

struct Evacuation {
  std::string path;
  SimTime latest_start = 0;
  double duration_seconds = 0;
  bool meetable = true;
};

class Migrator {
 public:
  // Returns false when the target refuses to start the job.
  using TargetStarter = std::function<bool(const std::string& target, SimTime at)>;

  Migrator(std::filesystem::path root, TransferModel model);

  Storage& storage() { return storage_; }
  const TransferModel& model() const { return model_; }
  void set_model(TransferModel model) { model_ = std::move(model); }
  void set_site_bandwidth(const std::string& site, double wan_mbps) { site_wan_[site] = wan_mbps; }
  void set_target_starter(TargetStarter starter) { starter_ = std::move(starter); }
  void set_evacuation_margin(double seconds) { margin_ = seconds; }

  // Returns the per-run token that later requests must present.
  std::string register_run(const std::string& run_id, const std::string& clique, ResourceProfile profile, SimTime now);

  void track_checkpoint(const std::string& run_id, const std::string& token, const CheckpointMeta& meta,
                        const std::string& site, std::optional<SimTime> purge_deadline = std::nullopt);
  void set_purge_deadline(const std::string& run_id, const std::string& site, SimTime deadline);

  MigrationPlan make_plan(const std::string& run_id, const std::string& target, MigrationTrigger trigger) const;

  // Stages the checkpoint along the plan's hops, starts the target and
  // restarts from the staged file. Ends RUNNING on the target, HIBERNATING
  // or LOST.
  MigrationReport migrate(const std::string& run_id, const std::string& token, MigrationPlan plan,
                          const std::optional<SolverState>& fresh, SimTime now);

  // Moves the newest checkpoint to safe storage. Idempotent.
  RunStatus hibernate(const std::string& run_id, SimTime now, const std::string& reason = "no matching resources");

  // Unsafe checkpoints with a deadline, with the time by which copying must
  // begin.
  std::vector<Evacuation> plan_evacuations(const std::string& run_id, SimTime now) const;
  // Copies every checkpoint whose latest start is at or before `now`.
  std::vector<Evacuation> evacuate_before_purge(const std::string& run_id, SimTime now);

  // Plan from the newest tracked checkpoint; nullopt (and DONE with failure)
  // when there is none.
  std::optional<MigrationPlan> recover(const std::string& run_id, const std::string& target, SimTime now);

  // Announce endpoint: accepts known runs and marks them RUNNING.
  bool accept_announce(const std::string& run_id, const std::string& location, SimTime at);

  RunEvent notify_user(const std::string& run_id, const std::string& kind, const std::string& detail, SimTime now);
  void mark_lost(const std::string& run_id, SimTime now, const std::string& reason);
  void mark_done(const std::string& run_id, SimTime now, bool failed, const std::string& detail);

  const SimulationRecord& record(const std::string& run_id) const;
  bool has_run(const std::string& run_id) const { return runs_.count(run_id) > 0; }
  std::vector<std::string> runs_with_status(RunStatus status) const;
  const std::vector<std::string>& alerts() const { return alerts_; }

 private:
  SimulationRecord& mutable_record(const std::string& run_id);
  void check_token(const SimulationRecord& r, const std::string& token) const;
  double hop_bandwidth(const std::string& from, const std::string& to) const;
  double copy_file(const std::string& from, const std::string& to);
  void alert(SimulationRecord& r, SimTime now, const std::string& message);
  std::uint64_t timing_size(std::uint64_t actual) const;

  Storage storage_;
  TransferModel model_;
  std::map<std::string, double> site_wan_;
  std::map<std::string, SimulationRecord> runs_;
  std::map<std::string, std::string> pending_kind_;
  std::vector<std::string> alerts_;
  TargetStarter starter_;
  double margin_ = 10.0;
  std::uint64_t token_counter_ = 0;
};

}  // namespace cworm

#endif  // CWORM_MIGRATOR_H_
