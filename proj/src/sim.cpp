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

#include "cworm/sim.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "cworm/selector.h"
#include "json.hpp"

namespace cworm {

namespace fs = std::filesystem;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

std::string describe(const ContractParams& p) {
  return "quantum=" + fmt(p.quantum_seconds) + " threshold=" + fmt(p.degradation_threshold) +
         " consecutive=" + std::to_string(p.consecutive_required);
}

}  // namespace

Engine::Engine(Scenario scenario, fs::path out_dir)
    : scenario_(std::move(scenario)), out_dir_(std::move(out_dir)), mig_(out_dir_, scenario_.transfer) {
  fs::create_directories(out_dir_);
  mig_.set_evacuation_margin(scenario_.evacuation_margin);
  params_ = scenario_.contract;
  for (const auto& d : scenario_.cliques) {
    catalog_[d.clique.name] = d;
    mig_.set_site_bandwidth(d.clique.name, d.clique.wan_bandwidth_mbps);
    if (d.registered_at_start) {
      dir_.register_clique(d.clique, d.ttl_seconds, 0);
      emit(0, "REGISTERED", d.clique.name);
    }
  }
  for (std::size_t i = 0; i < scenario_.events.size(); ++i) schedule(scenario_.events[i].time, Scripted{i});
  watched_version_ = dir_.version();
}

void Engine::schedule(SimTime t, Payload p) { queue_.push(Item{t, seq_++, std::move(p)}); }

void Engine::run_until(SimTime t) {
  std::lock_guard lock(mu_);
  t = std::min(t, scenario_.end_time);
  while (!queue_.empty() && queue_.top().time <= t) {
    Item item = queue_.top();
    queue_.pop();
    now_ = std::max(now_, item.time);
    process(item);
  }
  now_ = std::max(now_, t);
}

bool Engine::finished() const {
  std::lock_guard lock(mu_);
  return now_ >= scenario_.end_time || queue_.empty();
}

SimTime Engine::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

const Clique& Engine::catalog(const std::string& name) const { return catalog_.at(name).clique; }

void Engine::emit(SimTime t, const std::string& kind, const std::string& detail) {
  events_.push_back({t, kind, detail});
  MetricsRecord r;
  r.seq = metrics_.size();
  r.time = t;
  r.quantum = quantum_index_;
  r.clique = clique_;
  r.event = kind;
  r.detail = detail;
  metrics_.push_back(std::move(r));
}

void Engine::sync_migrator() {
  if (!mig_.has_run(scenario_.run_id)) return;
  const auto& evs = mig_.record(scenario_.run_id).events;
  for (; synced_events_ < evs.size(); ++synced_events_) {
    const auto& e = evs[synced_events_];
    if (e.time <= now_) {
      emit(now_, e.kind, e.detail);
    } else {
      schedule(e.time, Flush{LogEvent{e.time, e.kind, e.detail}});
    }
  }
}

void Engine::process(Item& item) {
  std::visit(Overloaded{
                 [&](const Scripted& s) { handle_scripted(scenario_.events[s.index]); },
                 [&](const QuantumEnd& q) {
                   if (q.epoch == epoch_ && phase_ == Phase::kRunning) end_quantum();
                 },
                 [&](Resume& r) {
                   if (r.epoch != epoch_ || phase_ != Phase::kMigrating) return;
                   phase_ = Phase::kRunning;
                   clique_ = r.target;
                   state_ = std::move(r.state);
                   monitor_.reset();
                   if (scenario_.workload.backup_interval > 0)
                     backups_.emplace(out_dir_ / "sites" / clique_ / scenario_.run_id,
                                      scenario_.workload.backup_interval, scenario_.workload.backup_retention, now_);
                   emit(now_, "RESUMED", clique_ + " at iteration " + std::to_string(state_.iteration));
                   start_quantum();
                 },
                 [&](const Flush& f) { emit(f.event.time, f.event.kind, f.event.detail); },
                 [&](const Evacuate&) {
                   if (!mig_.has_run(scenario_.run_id)) return;
                   mig_.evacuate_before_purge(scenario_.run_id, now_);
                   sync_migrator();
                 },
                 [&](const ApplyCommands&) {
                   if (phase_ != Phase::kRunning || !paused_) return;
                   apply_commands();
                   if (!paused_) start_quantum();
                 },
             },
             item.payload);
  watch();
}

// -- Scripted events -----------------------------------------------------------------

void Engine::handle_scripted(const ScenarioEvent& e) {
  switch (e.kind) {
    case EventKind::kStartRun:
      start_run();
      break;
    case EventKind::kInjectLoad:
      apply_load(e.args[0], e.args[1], std::stod(e.args[2]));
      break;
    case EventKind::kRegisterClique: {
      const auto& d = catalog_.at(e.args[0]);
      dir_.register_clique(d.clique, d.ttl_seconds, now_);
      emit(now_, "REGISTERED", e.args[0]);
      better_check_ = true;
      break;
    }
    case EventKind::kDeregisterClique:
      dir_.deregister(e.args[0]);
      emit(now_, "DEREGISTERED", e.args[0]);
      break;
    case EventKind::kKillSource:
      kill_source(e.args[0] == "graceful");
      break;
    case EventKind::kPurgeDeadline: {
      if (!mig_.has_run(scenario_.run_id)) {
        emit(now_, "IGNORED", "purge_deadline: no run");
        break;
      }
      double deadline = std::stod(e.args[1]);
      mig_.set_purge_deadline(scenario_.run_id, e.args[0], deadline);
      emit(now_, "PURGE_NOTICE", e.args[0] + " purges at " + fmt(deadline));
      for (const auto& ev : mig_.plan_evacuations(scenario_.run_id, now_)) {
        emit(now_, "EVACUATION_PLANNED", ev.path + " latest start " + fmt(ev.latest_start));
        schedule(std::max(now_, ev.latest_start), Evacuate{});
      }
      break;
    }
    case EventKind::kManualMigrate: {
      MigrateCommand c;
      if (!e.args.empty()) c.target = e.args[0];
      auto ack = submit_locked(c);
      if (!ack.accepted) emit(now_, "COMMAND_REJECTED", "migrate: " + ack.message);
      break;
    }
    case EventKind::kSetContract: {
      SetContractCommand c;
      for (const auto& a : e.args) {
        auto eq = a.find('=');
        std::string k = a.substr(0, eq);
        double v = std::stod(a.substr(eq + 1));
        if (k == "quantum") c.quantum_seconds = v;
        if (k == "threshold") c.degradation_threshold = v;
        if (k == "consecutive") c.consecutive_required = static_cast<int>(v);
      }
      auto ack = submit_locked(c);
      if (!ack.accepted) emit(now_, "COMMAND_REJECTED", "set_contract: " + ack.message);
      break;
    }
    case EventKind::kAnnotation:
      emit(now_, "ANNOTATION", e.args[0]);
      break;
  }
}

void Engine::apply_load(const std::string& clique, const std::string& machine, double delta) {
  auto& members = catalog_.at(clique).clique.members;
  auto it = std::find_if(members.begin(), members.end(), [&](const MachineSpec& m) { return m.name == machine; });
  try {
    *it = cworm::apply_load(*it, delta);
  } catch (const InvalidResource& e) {
    emit(now_, "ERROR", std::string("inject_load: ") + e.what());
    return;
  }
  if (dir_.registration(clique)) dir_.apply_load(clique, machine, delta);
  emit(now_, "LOAD", clique + "/" + machine + " " + (delta >= 0 ? "+" : "") + fmt(delta) + " -> " + fmt(it->load));
}

void Engine::start_run() {
  if (phase_ != Phase::kIdle) {
    emit(now_, "IGNORED", "start_run: run already started");
    return;
  }
  const auto& w = scenario_.workload;
  state_ = make_initial_state(w.dims, w.alpha, scenario_.run_id, w.seed);
  SelectionRequest req{scenario_.request, scenario_.run_id, {}, {}};
  auto r = select(req, dir_, now_);
  if (r.ok())
    emit(now_, "SELECTED", r.success().clique_name + " rank=" + fmt(r.success().rank));
  else
    emit(now_, "SELECTION_FAILED", r.failure().reason);
  token_ = mig_.register_run(scenario_.run_id, r.ok() ? r.success().clique_name : "(none)", profile_of(state_), now_);
  sync_migrator();
  if (!r.ok()) {
    phase_ = Phase::kRunning;
    hibernate_with_fresh_checkpoint(kStoreSite, r.failure().reason);
    return;
  }
  phase_ = Phase::kRunning;
  clique_ = r.success().clique_name;
  if (w.backup_interval > 0)
    backups_.emplace(out_dir_ / "sites" / clique_ / scenario_.run_id, w.backup_interval, w.backup_retention, now_);
  start_quantum();
}

void Engine::hibernate_with_fresh_checkpoint(const std::string& site, const std::string& reason) {
  std::string rel = checkpoint_path(site, scenario_.run_id, state_.iteration);
  auto meta = write_checkpoint(state_, out_dir_ / rel, now_);
  mig_.track_checkpoint(scenario_.run_id, token_, meta, site);
  RunStatus st = mig_.hibernate(scenario_.run_id, now_, reason);
  sync_migrator();
  phase_ = st == RunStatus::kHibernating ? Phase::kHibernating : Phase::kLost;
  clique_.clear();
  ++epoch_;
  watched_version_ = dir_.version();
}

// -- Quanta ------------------------------------------------------------------------------

void Engine::start_quantum() {
  if (phase_ != Phase::kRunning || paused_) return;
  quantum_start_ = now_;
  quantum_len_ = params_.quantum_seconds;
  full_planned_ = iterations_for_quantum(catalog(clique_), quantum_len_);
  planned_ = full_planned_;
  quantum_elapsed_ = quantum_len_;
  const auto limit = scenario_.workload.iterations;
  if (limit > 0) {
    auto remaining = static_cast<std::int64_t>(limit - std::min(limit, state_.iteration));
    if (planned_ >= remaining && full_planned_ > 0) {
      planned_ = remaining;
      quantum_elapsed_ = quantum_len_ * static_cast<double>(planned_) / static_cast<double>(full_planned_);
    }
  }
  schedule(quantum_start_ + quantum_elapsed_, QuantumEnd{epoch_});
}

void Engine::end_quantum() {
  advance(state_, static_cast<std::uint64_t>(planned_));
  ++quantum_index_;
  MetricsRecord rec;
  rec.seq = metrics_.size();
  rec.time = now_;
  rec.quantum = quantum_index_;
  rec.clique = clique_;
  if (!monitor_) {
    double rate = static_cast<double>(planned_) / quantum_elapsed_;
    rec.rate = rate;
    if (rate > 0) {
      monitor_ = ContractMonitor::init(rate, params_);
      const auto& v = monitor_->history().back();
      rec.average = v.average;
      rec.degradation = v.degradation;
    }
  } else {
    auto v = monitor_->observe(planned_, quantum_elapsed_);
    rec.rate = v.rate;
    rec.average = v.average;
    rec.degradation = v.degradation;
    rec.violation = v.violation;
    rec.trigger = v.trigger;
  }
  const bool trigger = rec.trigger;
  metrics_.push_back(rec);
  events_.push_back({now_, "QUANTUM", std::to_string(quantum_index_) + " " + clique_ + " rate=" + fmt(*rec.rate) +
                                          (rec.violation ? " VIOLATION" : "") + (trigger ? " TRIGGER" : "")});

  if (backups_) {
    if (auto m = backups_->tick(state_, now_)) {
      mig_.track_checkpoint(scenario_.run_id, token_, *m, clique_);
      emit(now_, "BACKUP", checkpoint_path(clique_, scenario_.run_id, m->iteration));
    }
  }

  const auto limit = scenario_.workload.iterations;
  if (limit > 0 && state_.iteration >= limit) {
    mig_.mark_done(scenario_.run_id, now_, false, "completed " + std::to_string(state_.iteration) + " iterations");
    sync_migrator();
    phase_ = Phase::kDone;
    ++epoch_;
    return;
  }

  apply_commands();
  if (phase_ == Phase::kRunning && trigger) {
    emit(now_, "CONTRACT_TRIGGER", std::to_string(monitor_->consecutive_violations()) + " consecutive violations");
    try_migrate(MigrationTrigger::kContractViolation, std::nullopt, true);
  }
  if (phase_ == Phase::kRunning && better_check_ && scenario_.workload.migrate_on_better)
    try_migrate(MigrationTrigger::kBetterResource, std::nullopt, true);
  better_check_ = false;
  if (phase_ == Phase::kRunning) start_quantum();
}

// -- Commands ----------------------------------------------------------------------------

std::optional<std::string> Engine::validate_target(const std::string& target) const {
  if (phase_ == Phase::kRunning && target == clique_) return "already running on " + target;
  const Clique* c = dir_.find(target, now_);
  if (!c) return "unknown clique: " + target;
  if (!classad::check_requirements(scenario_.request, derive_clique_ad(*c, now_)))
    return "clique " + target + " does not satisfy the request requirements";
  return std::nullopt;
}

CommandAck Engine::submit(const ControlCommand& command) {
  std::lock_guard lock(mu_);
  return submit_locked(command);
}

CommandAck Engine::submit_locked(const ControlCommand& command) {
  CommandAck ack;
  auto reject = [&](int status, std::string msg) {
    ack.accepted = false;
    ack.http_status = status;
    ack.message = std::move(msg);
    return ack;
  };
  const bool active = phase_ != Phase::kIdle && phase_ != Phase::kDone;
  std::optional<CommandAck> early = std::visit(
      Overloaded{
          [&](const SetContractCommand& c) -> std::optional<CommandAck> {
            if (!active) return reject(409, "no active run");
            if (!c.quantum_seconds && !c.degradation_threshold && !c.consecutive_required)
              return reject(400, "no contract parameters given");
            ContractParams p = params_;
            if (c.quantum_seconds) p.quantum_seconds = *c.quantum_seconds;
            if (c.degradation_threshold) p.degradation_threshold = *c.degradation_threshold;
            if (c.consecutive_required) p.consecutive_required = *c.consecutive_required;
            try {
              validate(p);
            } catch (const ContractError& e) {
              return reject(400, e.what());
            }
            return std::nullopt;
          },
          [&](const MigrateCommand& c) -> std::optional<CommandAck> {
            if (phase_ != Phase::kRunning) return reject(409, "run is not running");
            if (c.target) {
              if (auto err = validate_target(*c.target)) {
                return reject(err->rfind("unknown", 0) == 0 ? 404 : 422, *err);
              }
              return std::nullopt;
            }
            SelectionRequest req{scenario_.request, scenario_.run_id, {clique_}, {}};
            auto r = select(req, dir_, now_);
            if (!r.ok()) return reject(409, r.failure().reason);
            return std::nullopt;
          },
          [&](const PauseCommand&) -> std::optional<CommandAck> {
            if (phase_ != Phase::kRunning) return reject(409, "run is not running");
            return std::nullopt;
          },
          [&](const ResumeCommand&) -> std::optional<CommandAck> {
            if (phase_ != Phase::kRunning) return reject(409, "run is not running");
            return std::nullopt;
          },
      },
      command);
  if (early) return *early;
  ack.accepted = true;
  ack.http_status = 202;
  ack.id = next_command_id_++;
  ack.message = "queued for the next quantum boundary";
  pending_.emplace_back(ack.id, command);
  if (paused_) schedule(now_, ApplyCommands{});
  return ack;
}

void Engine::apply_commands() {
  while (!pending_.empty()) {
    auto [id, cmd] = std::move(pending_.front());
    pending_.pop_front();
    const std::string tag = "#" + std::to_string(id) + " ";
    std::visit(Overloaded{
                   [&](const SetContractCommand& c) {
                     ContractParams p = params_;
                     if (c.quantum_seconds) p.quantum_seconds = *c.quantum_seconds;
                     if (c.degradation_threshold) p.degradation_threshold = *c.degradation_threshold;
                     if (c.consecutive_required) p.consecutive_required = *c.consecutive_required;
                     try {
                       if (monitor_) monitor_->set_params(p);
                       validate(p);
                       params_ = p;
                       emit(now_, "COMMAND_APPLIED", tag + "set_contract " + describe(p));
                     } catch (const ContractError& e) {
                       emit(now_, "COMMAND_APPLIED", tag + "set_contract rejected: " + e.what());
                     }
                   },
                   [&](const MigrateCommand& c) { apply_migrate(c, id); },
                   [&](const PauseCommand&) {
                     paused_ = true;
                     emit(now_, "COMMAND_APPLIED", tag + "pause");
                   },
                   [&](const ResumeCommand&) {
                     paused_ = false;
                     emit(now_, "COMMAND_APPLIED", tag + "resume");
                   },
               },
               cmd);
  }
}

bool Engine::apply_migrate(const MigrateCommand& c, std::uint64_t id) {
  emit(now_, "COMMAND_APPLIED", "#" + std::to_string(id) + " migrate " + c.target.value_or("(selector)"));
  if (phase_ != Phase::kRunning) {
    emit(now_, "MIGRATE_REJECTED", "run is not running");
    return false;
  }
  return try_migrate(MigrationTrigger::kManual, c.target, false);
}

// -- Migration ---------------------------------------------------------------------------

bool Engine::try_migrate(MigrationTrigger trigger, const std::optional<std::string>& target, bool require_better) {
  const bool manual = trigger == MigrationTrigger::kManual;
  std::string chosen;
  if (target) {
    if (auto err = validate_target(*target)) {
      emit(now_, manual ? "MIGRATE_REJECTED" : "NO_TARGET", *err);
      return false;
    }
    chosen = *target;
  } else {
    SelectionRequest req{scenario_.request, scenario_.run_id, {}, {}};
    req = exclude_current(std::move(req), clique_, dir_, now_);
    if (!require_better) req.min_rank.reset();
    auto r = select(req, dir_, now_);
    if (!r.ok()) {
      if (trigger != MigrationTrigger::kBetterResource)
        emit(now_, manual ? "MIGRATE_REJECTED" : "NO_TARGET",
             std::string(to_string(trigger)) + ": " + r.failure().reason);
      return false;
    }
    chosen = r.success().clique_name;
    emit(now_, "SELECTED", chosen + " rank=" + fmt(r.success().rank));
  }
  for (auto it = metrics_.rbegin(); it != metrics_.rend(); ++it) {
    if (it->is_quantum()) {
      if (it->time == now_) it->migration = true;
      break;
    }
  }
  begin_migration(mig_.make_plan(scenario_.run_id, chosen, trigger), state_);
  return true;
}

void Engine::begin_migration(MigrationPlan plan, const std::optional<SolverState>& fresh) {
  const std::string target = plan.target;
  auto rep = mig_.migrate(scenario_.run_id, token_, std::move(plan), fresh, now_);
  ++epoch_;
  sync_migrator();
  switch (rep.outcome) {
    case RunStatus::kRunning:
      phase_ = Phase::kMigrating;
      schedule(rep.completed_at, Resume{epoch_, target, std::move(*rep.restored)});
      break;
    case RunStatus::kHibernating:
      phase_ = Phase::kHibernating;
      clique_.clear();
      watched_version_ = dir_.version();
      break;
    default:
      phase_ = Phase::kLost;
      clique_.clear();
      watched_version_ = dir_.version();
      break;
  }
}

void Engine::kill_source(bool graceful) {
  if (phase_ != Phase::kRunning) {
    emit(now_, "IGNORED", "kill_source: no running source");
    return;
  }
  const std::string source = clique_;
  if (graceful && quantum_elapsed_ > 0) {
    double frac = std::clamp((now_ - quantum_start_) / quantum_elapsed_, 0.0, 1.0);
    advance(state_, static_cast<std::uint64_t>(std::floor(static_cast<double>(planned_) * frac)));
  }
  ++epoch_;
  dir_.deregister(source);
  emit(now_, "SOURCE_KILLED", source + (graceful ? " graceful" : " crash"));
  SelectionRequest req{scenario_.request, scenario_.run_id, {source}, {}};
  auto r = select(req, dir_, now_);
  if (graceful) {
    if (!r.ok()) {
      emit(now_, "SELECTION_FAILED", r.failure().reason);
      hibernate_with_fresh_checkpoint(source, r.failure().reason);
      return;
    }
    emit(now_, "SELECTED", r.success().clique_name + " rank=" + fmt(r.success().rank));
    begin_migration(mig_.make_plan(scenario_.run_id, r.success().clique_name, MigrationTrigger::kSourceShutdown),
                    state_);
    return;
  }
  if (!r.ok()) {
    emit(now_, "SELECTION_FAILED", r.failure().reason);
    mig_.mark_lost(scenario_.run_id, now_, "source " + source + " crashed and no resources match");
    sync_migrator();
    phase_ = Phase::kLost;
    clique_.clear();
    watched_version_ = dir_.version();
    return;
  }
  auto plan = mig_.recover(scenario_.run_id, r.success().clique_name, now_);
  sync_migrator();
  if (!plan) {
    phase_ = Phase::kDone;
    clique_.clear();
    return;
  }
  emit(now_, "SELECTED", r.success().clique_name + " rank=" + fmt(r.success().rank));
  begin_migration(std::move(*plan), std::nullopt);
}

void Engine::watch() {
  if (phase_ != Phase::kHibernating && phase_ != Phase::kLost) return;
  if (dir_.version() == watched_version_) return;
  watched_version_ = dir_.version();
  SelectionRequest req{scenario_.request, scenario_.run_id, {}, {}};
  auto r = select(req, dir_, now_);
  if (!r.ok()) return;
  const std::string target = r.success().clique_name;
  emit(now_, "SELECTED", target + " rank=" + fmt(r.success().rank));
  if (phase_ == Phase::kHibernating) {
    begin_migration(mig_.make_plan(scenario_.run_id, target, MigrationTrigger::kBetterResource), std::nullopt);
    return;
  }
  auto plan = mig_.recover(scenario_.run_id, target, now_);
  sync_migrator();
  if (!plan) {
    phase_ = Phase::kDone;
    return;
  }
  begin_migration(std::move(*plan), std::nullopt);
}

// -- Snapshots ---------------------------------------------------------------------------

const char* Engine::phase_name(Phase p) {
  switch (p) {
    case Phase::kIdle: return "";
    case Phase::kRunning: return "RUNNING";
    case Phase::kMigrating: return "MIGRATING";
    case Phase::kHibernating: return "HIBERNATING";
    case Phase::kLost: return "LOST";
    case Phase::kDone: return "DONE";
  }
  return "?";
}

StatusSnapshot Engine::status_locked() const {
  StatusSnapshot s;
  s.time = now_;
  if (phase_ == Phase::kIdle) return s;
  s.has_run = true;
  s.run_id = scenario_.run_id;
  s.status = phase_name(phase_);
  s.clique = clique_;
  s.iteration = state_.iteration;
  s.contract = params_;
  s.consecutive_violations = monitor_ ? monitor_->consecutive_violations() : 0;
  s.quantum = quantum_index_;
  s.paused = paused_;
  return s;
}

StatusSnapshot Engine::status() const {
  std::lock_guard lock(mu_);
  return status_locked();
}

std::vector<MetricsRecord> Engine::metrics_since(std::uint64_t since) const {
  std::lock_guard lock(mu_);
  if (since >= metrics_.size()) return {};
  return {metrics_.begin() + static_cast<std::ptrdiff_t>(since), metrics_.end()};
}

std::vector<LogEvent> Engine::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<ResourceRow> Engine::resources() const {
  std::lock_guard lock(mu_);
  std::vector<ResourceRow> out;
  for (const Clique* c : dir_.live(now_)) {
    auto ad = derive_clique_ad(*c, now_);
    ResourceRow row;
    row.name = c->name;
    auto num = [&](const char* attr) {
      auto v = classad::evaluate_attribute(attr, ad, {});
      return v.is_number() ? v.as_number() : 0.0;
    };
    row.cpu_count = static_cast<std::int64_t>(num("CPUCount"));
    row.min_mem_size = static_cast<std::int64_t>(num("minMemSize"));
    row.max_cpu_load = num("maxCPULoad");
    row.matches = classad::check_requirements(scenario_.request, ad);
    row.rank = row.matches ? classad::compute_rank(scenario_.request, ad) : 0.0;
    row.current = phase_ == Phase::kRunning && c->name == clique_;
    out.push_back(row);
  }
  return out;
}

RunResult Engine::result() const {
  std::lock_guard lock(mu_);
  return RunResult{metrics_, events_, status_locked(), state_, mig_.alerts()};
}

void Engine::write_logs(const fs::path& dir) const {
  std::lock_guard lock(mu_);
  fs::create_directories(dir);
  {
    std::ofstream m(dir / "metrics.log", std::ios::binary | std::ios::trunc);
    for (const auto& r : metrics_) m << to_json_line(r) << '\n';
  }
  {
    std::ofstream e(dir / "events.log", std::ios::binary | std::ios::trunc);
    for (const auto& ev : events_) {
      nlohmann::ordered_json j;
      j["time"] = ev.time;
      if (scenario_.clock_origin) j["clock"] = clock_label(*scenario_.clock_origin, ev.time);
      j["kind"] = ev.kind;
      j["detail"] = ev.detail;
      e << j.dump() << '\n';
    }
  }
  std::ofstream p(dir / "plot.tsv", std::ios::binary | std::ios::trunc);
  p << export_plot_data(metrics_);
}

RunResult run_scenario(const Scenario& scenario, const fs::path& out_dir) {
  Engine engine(scenario, out_dir);
  engine.run();
  return engine.result();
}

}  // namespace cworm
