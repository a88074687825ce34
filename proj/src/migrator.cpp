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

#include "cworm/migrator.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <system_error>

namespace cworm {

namespace fs = std::filesystem;

// -- Storage ---------------------------------------------------------------------------

Storage::Storage(fs::path root) : root_(std::move(root)) {}

void Storage::write(const std::string& path, std::span<const std::uint8_t> bytes) {
  if (fault_) fault_("write", path);
  ++touches_;
  fs::path full = root_ / path;
  std::error_code ec;
  fs::create_directories(full.parent_path(), ec);
  fs::path tmp = full;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw StorageError("write failed: " + path);
    }
  }
  fs::rename(tmp, full, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw StorageError("write failed: " + path);
  }
}

std::vector<std::uint8_t> Storage::read(const std::string& path) {
  if (fault_) fault_("read", path);
  ++touches_;
  std::ifstream in(root_ / path, std::ios::binary);
  if (!in) throw StorageError("read failed: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool Storage::exists(const std::string& path) const { return fs::is_regular_file(root_ / path); }

void Storage::remove(const std::string& path) {
  std::error_code ec;
  fs::remove(root_ / path, ec);
}

std::uint64_t Storage::size_of(const std::string& path) const {
  std::error_code ec;
  auto n = fs::file_size(root_ / path, ec);
  return ec ? 0 : n;
}

std::string checkpoint_path(const std::string& site, const std::string& run_id, std::uint64_t iteration) {
  std::string base = site == kStoreSite ? std::string(kStoreSite) : "sites/" + site;
  return base + "/" + run_id + "/" + checkpoint_filename(iteration);
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kRunning: return "RUNNING";
    case RunStatus::kMigrating: return "MIGRATING";
    case RunStatus::kHibernating: return "HIBERNATING";
    case RunStatus::kLost: return "LOST";
    case RunStatus::kDone: return "DONE";
  }
  return "?";
}

const char* to_string(MigrationTrigger t) {
  switch (t) {
    case MigrationTrigger::kContractViolation: return "CONTRACT_VIOLATION";
    case MigrationTrigger::kManual: return "MANUAL";
    case MigrationTrigger::kBetterResource: return "BETTER_RESOURCE";
    case MigrationTrigger::kSourceShutdown: return "SOURCE_SHUTDOWN";
  }
  return "?";
}

const TrackedCheckpoint* SimulationRecord::newest_checkpoint(const Storage& storage) const {
  const TrackedCheckpoint* best = nullptr;
  for (const auto& c : checkpoints) {
    if (!storage.exists(c.path)) continue;
    // Prefer the safe copy among equal iterations.
    if (!best || c.meta.iteration > best->meta.iteration || (c.meta.iteration == best->meta.iteration && c.safe))
      best = &c;
  }
  return best;
}

double modeled_duration(const TransferModel& model, std::uint64_t size_bytes, const std::vector<Hop>& hops,
                        bool fresh_checkpoint) {
  const double mb = static_cast<double>(size_bytes) / kBytesPerMB;
  double d = 0;
  if (fresh_checkpoint && model.disk_write_mbps > 0) d += mb / model.disk_write_mbps;
  for (const auto& h : hops) d += mb / h.bandwidth_mbps + model.per_hop_overhead_seconds;
  d += model.restart_latency_seconds;
  return d;
}

// -- Migrator --------------------------------------------------------------------------

Migrator::Migrator(fs::path root, TransferModel model) : storage_(std::move(root)), model_(std::move(model)) {}

SimulationRecord& Migrator::mutable_record(const std::string& run_id) {
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw MigratorError("unknown run: " + run_id);
  return it->second;
}

const SimulationRecord& Migrator::record(const std::string& run_id) const {
  auto it = runs_.find(run_id);
  if (it == runs_.end()) throw MigratorError("unknown run: " + run_id);
  return it->second;
}

std::vector<std::string> Migrator::runs_with_status(RunStatus status) const {
  std::vector<std::string> out;
  for (const auto& [id, r] : runs_)
    if (r.status == status) out.push_back(id);
  return out;
}

void Migrator::check_token(const SimulationRecord& r, const std::string& token) const {
  if (token != r.token) throw MigratorError("invalid token for run " + r.run_id);
}

std::uint64_t Migrator::timing_size(std::uint64_t actual) const {
  return model_.modeled_checkpoint_bytes.value_or(actual);
}

std::string Migrator::register_run(const std::string& run_id, const std::string& clique, ResourceProfile profile,
                                   SimTime now) {
  if (run_id.empty()) throw MigratorError("empty run id");
  if (runs_.count(run_id)) throw MigratorError("run already registered: " + run_id);
  SimulationRecord r;
  r.run_id = run_id;
  r.status = RunStatus::kRunning;
  r.current_clique = clique;
  r.profile = std::move(profile);
  char buf[32];
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : run_id + "#" + std::to_string(++token_counter_)) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  r.token = buf;
  r.events.push_back({now, "STARTED", "on " + clique});
  auto [it, _] = runs_.emplace(run_id, std::move(r));
  return it->second.token;
}

void Migrator::track_checkpoint(const std::string& run_id, const std::string& token, const CheckpointMeta& meta,
                                const std::string& site, std::optional<SimTime> purge_deadline) {
  auto& r = mutable_record(run_id);
  check_token(r, token);
  fs::path loc(meta.location);
  std::string rel = loc.is_absolute() ? fs::relative(loc, storage_.root()).generic_string() : meta.location;
  auto same = [&](const TrackedCheckpoint& c) { return c.path == rel; };
  r.checkpoints.erase(std::remove_if(r.checkpoints.begin(), r.checkpoints.end(), same), r.checkpoints.end());
  r.checkpoints.push_back({meta, rel, site, purge_deadline, site == kStoreSite});
}

void Migrator::set_purge_deadline(const std::string& run_id, const std::string& site, SimTime deadline) {
  for (auto& c : mutable_record(run_id).checkpoints)
    if (c.site == site && !c.safe) c.purge_deadline = deadline;
}

double Migrator::hop_bandwidth(const std::string& from, const std::string& to) const {
  if (auto it = model_.hop_bandwidth_mbps.find({from, to}); it != model_.hop_bandwidth_mbps.end()) return it->second;
  auto wan = [&](const std::string& site) {
    auto it = site_wan_.find(site);
    if (it == site_wan_.end()) throw MigratorError("no bandwidth known for site " + site);
    return it->second;
  };
  if (from == kStoreSite) return wan(to);
  if (to == kStoreSite) return wan(from);
  return std::min(wan(from), wan(to));
}

MigrationPlan Migrator::make_plan(const std::string& run_id, const std::string& target,
                                  MigrationTrigger trigger) const {
  const auto& r = record(run_id);
  MigrationPlan p;
  p.run_id = run_id;
  p.target = target;
  p.trigger = trigger;
  if (r.status == RunStatus::kRunning && r.current_clique) {
    p.source = r.current_clique;
    if (model_.direct) {
      p.hops.push_back({*p.source, target, hop_bandwidth(*p.source, target)});
    } else {
      p.hops.push_back({*p.source, kStoreSite, hop_bandwidth(*p.source, kStoreSite)});
      p.hops.push_back({kStoreSite, target, hop_bandwidth(kStoreSite, target)});
    }
    return p;
  }
  const TrackedCheckpoint* ck = r.newest_checkpoint(storage_);
  if (!ck) throw MigratorError("run " + run_id + " has no checkpoint to restart from");
  p.checkpoint = *ck;
  if (ck->site != kStoreSite) p.hops.push_back({ck->site, kStoreSite, hop_bandwidth(ck->site, kStoreSite)});
  p.hops.push_back({kStoreSite, target, hop_bandwidth(kStoreSite, target)});
  return p;
}

void Migrator::alert(SimulationRecord& r, SimTime now, const std::string& message) {
  alerts_.push_back(r.run_id + ": " + message);
  r.events.push_back({now, "ALERT", message});
}

double Migrator::copy_file(const std::string& from, const std::string& to) {
  auto bytes = storage_.read(from);
  storage_.write(to, bytes);
  return static_cast<double>(bytes.size());
}

MigrationReport Migrator::migrate(const std::string& run_id, const std::string& token, MigrationPlan plan,
                                  const std::optional<SolverState>& fresh, SimTime now) {
  auto& r = mutable_record(run_id);
  check_token(r, token);
  if (r.status == RunStatus::kDone) throw MigratorError("run " + run_id + " is finished");
  if (plan.hops.empty()) throw MigratorError("migration plan has no hops");

  MigrationReport rep;
  const std::uint64_t touches_before = storage_.touches();
  const bool recovering = !fresh && plan.trigger == MigrationTrigger::kSourceShutdown;
  r.status = RunStatus::kMigrating;
  r.events.push_back({now, "MIGRATION_START",
                      std::string(to_string(plan.trigger)) + " " + plan.source.value_or(kStoreSite) + " -> " +
                          plan.target});

  auto finish_hibernating = [&](const std::string& why) {
    rep.detail = why;
    rep.completed_at = now + rep.duration_seconds;
    r.status = RunStatus::kRunning;  // hibernate() expects a live run
    rep.outcome = hibernate(run_id, rep.completed_at, why);
    rep.disk_touches = storage_.touches() - touches_before;
    return rep;
  };

  // 1. Fresh checkpoint at the source.
  std::string path;
  std::uint64_t iteration = 0;
  if (fresh) {
    if (!plan.source) throw MigratorError("a fresh checkpoint needs a source site");
    auto bytes = encode_checkpoint(*fresh);
    path = checkpoint_path(*plan.source, run_id, fresh->iteration);
    try {
      storage_.write(path, bytes);
    } catch (const StorageError& e) {
      r.status = RunStatus::kRunning;
      rep.outcome = RunStatus::kRunning;
      rep.detail = e.what();
      rep.disk_touches = storage_.touches() - touches_before;
      alert(r, now, std::string("checkpoint failed, migration abandoned: ") + e.what());
      return rep;
    }
    iteration = fresh->iteration;
    CheckpointMeta meta{(storage_.root() / path).string(), bytes.size(), now, iteration, run_id};
    r.checkpoints.push_back({meta, path, *plan.source, std::nullopt, false});
    rep.size_bytes = bytes.size();
  } else {
    if (!plan.checkpoint) throw MigratorError("migration plan has no checkpoint");
    path = plan.checkpoint->path;
    iteration = plan.checkpoint->meta.iteration;
    rep.size_bytes = storage_.size_of(path);
  }
  const double mb = static_cast<double>(timing_size(rep.size_bytes)) / kBytesPerMB;
  if (fresh && model_.disk_write_mbps > 0) rep.duration_seconds += mb / model_.disk_write_mbps;

  // 2-3. Stage along the hops.
  std::optional<std::vector<std::uint8_t>> streamed;
  for (std::size_t i = 0; i < plan.hops.size(); ++i) {
    const Hop& hop = plan.hops[i];
    const bool stream = model_.direct && i + 1 == plan.hops.size() && hop.to == plan.target;
    std::string dest = checkpoint_path(hop.to, run_id, iteration);
    bool moved = false;
    for (int attempt = 1; attempt <= std::max(1, model_.max_transfer_attempts) && !moved; ++attempt) {
      ++rep.transfer_attempts;
      rep.duration_seconds += mb / hop.bandwidth_mbps + model_.per_hop_overhead_seconds;
      try {
        if (stream) {
          streamed = storage_.read(path);
        } else {
          copy_file(path, dest);
        }
        moved = true;
      } catch (const StorageError& e) {
        r.events.push_back({now + rep.duration_seconds, "TRANSFER_FAILED",
                            hop.from + " -> " + hop.to + " attempt " + std::to_string(attempt) + ": " + e.what()});
      }
    }
    if (!moved) return finish_hibernating("transfer " + hop.from + " -> " + hop.to + " failed");
    if (!stream) {
      path = dest;
      CheckpointMeta meta{(storage_.root() / dest).string(), storage_.size_of(dest), now + rep.duration_seconds,
                          iteration, run_id};
      r.checkpoints.push_back({meta, dest, hop.to, std::nullopt, hop.to == kStoreSite});
    }
  }

  // 4. Start the job on the target.
  if (starter_ && !starter_(plan.target, now + rep.duration_seconds))
    return finish_hibernating("target " + plan.target + " refused to start");

  // 5. Restart from the staged checkpoint.
  try {
    std::vector<std::uint8_t> bytes = streamed ? std::move(*streamed) : storage_.read(path);
    rep.restored = decode_checkpoint(bytes);
  } catch (const std::exception& e) {
    return finish_hibernating(std::string("restart failed: ") + e.what());
  }
  rep.duration_seconds += model_.restart_latency_seconds;
  rep.completed_at = now + rep.duration_seconds;

  // 6. The restarted run announces itself.
  pending_kind_[run_id] = recovering ? "RECOVERED" : "RELOCATED";
  AnnounceEndpoint endpoint = [this](const std::string& id, const std::string& loc, SimTime at) {
    return accept_announce(id, loc, at);
  };
  auto ann = announce(run_id, plan.target, endpoint, rep.completed_at);
  if (!ann.accepted) return finish_hibernating("announce failed");
  rep.outcome = r.status;
  rep.disk_touches = storage_.touches() - touches_before;
  r.events.push_back({rep.completed_at, "MIGRATION_REPORT",
                      "duration=" + std::to_string(rep.duration_seconds) +
                          " disk_touches=" + std::to_string(rep.disk_touches)});
  return rep;
}

bool Migrator::accept_announce(const std::string& run_id, const std::string& location, SimTime at) {
  auto it = runs_.find(run_id);
  if (it == runs_.end()) return false;
  auto& r = it->second;
  if (r.status == RunStatus::kDone) return false;
  if (r.status == RunStatus::kRunning && r.current_clique == location) return true;
  r.status = RunStatus::kRunning;
  r.current_clique = location;
  std::string kind = "RELOCATED";
  if (auto p = pending_kind_.find(run_id); p != pending_kind_.end()) {
    kind = p->second;
    pending_kind_.erase(p);
  }
  notify_user(run_id, kind, "to " + location, at);
  return true;
}

RunEvent Migrator::notify_user(const std::string& run_id, const std::string& kind, const std::string& detail,
                               SimTime now) {
  auto& r = mutable_record(run_id);
  r.events.push_back({now, kind, detail});
  return r.events.back();
}

RunStatus Migrator::hibernate(const std::string& run_id, SimTime now, const std::string& reason) {
  auto& r = mutable_record(run_id);
  if (r.status == RunStatus::kHibernating) return r.status;
  if (r.status == RunStatus::kDone) throw MigratorError("run " + run_id + " is finished");
  const TrackedCheckpoint* ck = r.newest_checkpoint(storage_);
  if (!ck) {
    mark_lost(run_id, now, "no checkpoint to hibernate");
    return r.status;
  }
  if (!ck->safe) {
    TrackedCheckpoint copy = *ck;
    std::string dest = checkpoint_path(kStoreSite, run_id, copy.meta.iteration);
    try {
      copy_file(copy.path, dest);
    } catch (const StorageError& e) {
      mark_lost(run_id, now, std::string("cannot move checkpoint to safe storage: ") + e.what());
      return r.status;
    }
    copy.meta.location = (storage_.root() / dest).string();
    copy.path = dest;
    copy.site = kStoreSite;
    copy.safe = true;
    copy.purge_deadline.reset();
    r.checkpoints.push_back(copy);
  }
  r.status = RunStatus::kHibernating;
  r.current_clique.reset();
  notify_user(run_id, "HIBERNATING", reason, now);
  return r.status;
}

std::vector<Evacuation> Migrator::plan_evacuations(const std::string& run_id, SimTime now) const {
  const auto& r = record(run_id);
  std::vector<Evacuation> out;
  for (const auto& c : r.checkpoints) {
    if (c.safe || !c.purge_deadline || !storage_.exists(c.path)) continue;
    bool in_store = std::any_of(r.checkpoints.begin(), r.checkpoints.end(), [&](const TrackedCheckpoint& o) {
      return o.safe && o.meta.iteration == c.meta.iteration;
    });
    if (in_store) continue;
    Evacuation e;
    e.path = c.path;
    double mb = static_cast<double>(timing_size(storage_.size_of(c.path))) / kBytesPerMB;
    e.duration_seconds = mb / hop_bandwidth(c.site, kStoreSite) + model_.per_hop_overhead_seconds;
    e.latest_start = *c.purge_deadline - e.duration_seconds - margin_;
    e.meetable = now + e.duration_seconds <= *c.purge_deadline;
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const Evacuation& a, const Evacuation& b) {
    return a.latest_start < b.latest_start || (a.latest_start == b.latest_start && a.path < b.path);
  });
  return out;
}

std::vector<Evacuation> Migrator::evacuate_before_purge(const std::string& run_id, SimTime now) {
  std::vector<Evacuation> done;
  for (const auto& e : plan_evacuations(run_id, now)) {
    if (e.latest_start > now) continue;
    auto& r = mutable_record(run_id);
    auto it = std::find_if(r.checkpoints.begin(), r.checkpoints.end(),
                           [&](const TrackedCheckpoint& c) { return c.path == e.path; });
    TrackedCheckpoint copy = *it;
    r.events.push_back({now, "EVACUATION_START", e.path});
    if (!e.meetable) alert(r, now, "purge deadline for " + e.path + " cannot be met; copying anyway");
    std::string dest = checkpoint_path(kStoreSite, run_id, copy.meta.iteration);
    try {
      copy_file(copy.path, dest);
    } catch (const StorageError& ex) {
      alert(r, now, std::string("evacuation failed: ") + ex.what());
      continue;
    }
    SimTime finished = now + e.duration_seconds;
    copy.meta.location = (storage_.root() / dest).string();
    copy.meta.written_at = finished;
    copy.path = dest;
    copy.site = kStoreSite;
    copy.safe = true;
    copy.purge_deadline.reset();
    r.checkpoints.push_back(copy);
    r.events.push_back({finished, "EVACUATED", dest});
    done.push_back(e);
  }
  return done;
}

std::optional<MigrationPlan> Migrator::recover(const std::string& run_id, const std::string& target, SimTime now) {
  auto& r = mutable_record(run_id);
  if (r.status == RunStatus::kDone) throw MigratorError("run " + run_id + " is finished");
  const TrackedCheckpoint* ck = r.newest_checkpoint(storage_);
  if (!ck) {
    mark_done(run_id, now, true, "unrecoverable: no tracked checkpoint");
    return std::nullopt;
  }
  MigrationPlan p;
  p.run_id = run_id;
  p.source = r.current_clique;
  p.target = target;
  p.trigger = MigrationTrigger::kSourceShutdown;
  p.checkpoint = *ck;
  if (ck->site != kStoreSite) p.hops.push_back({ck->site, kStoreSite, hop_bandwidth(ck->site, kStoreSite)});
  p.hops.push_back({kStoreSite, target, hop_bandwidth(kStoreSite, target)});
  r.status = RunStatus::kLost;
  r.current_clique.reset();
  return p;
}

void Migrator::mark_lost(const std::string& run_id, SimTime now, const std::string& reason) {
  auto& r = mutable_record(run_id);
  r.status = RunStatus::kLost;
  r.current_clique.reset();
  r.events.push_back({now, "LOST", reason});
  alert(r, now, reason);
}

void Migrator::mark_done(const std::string& run_id, SimTime now, bool failed, const std::string& detail) {
  auto& r = mutable_record(run_id);
  r.status = RunStatus::kDone;
  r.failed = failed;
  r.current_clique.reset();
  r.events.push_back({now, failed ? "FAILED" : "DONE", detail});
}

}  // namespace cworm
