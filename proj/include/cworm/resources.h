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

// Machines, cliques and the TTL-based aggregate directory they register
// with. Cliques are advertised as a single ClassAd of derived aggregates.

#ifndef CWORM_RESOURCES_H_
#define CWORM_RESOURCES_H_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cworm/classad.h"

namespace cworm {

// Seconds on the simulation clock.
using SimTime = double;

class InvalidResource : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MachineSpec {
  std::string name;
  std::string domain;
  std::string op_sys;
  int cpu_count = 1;
  double cpu_speed_mhz = 1.0;
  std::int64_t mem_bytes = 1;
  // Current external load average.
  double load = 0.0;
  // Solver iterations/s on an unloaded machine.
  double iter_rate_factor = 1.0;
};

struct Clique {
  std::string name;
  std::vector<MachineSpec> members;
  double link_bandwidth_mbps = 1.0;
  // Bandwidth between this clique and the migrator store.
  double wan_bandwidth_mbps = 1.0;
};

// Throw InvalidResource naming the violated constraint.
void validate(const MachineSpec& machine);
void validate(const Clique& clique);

// Returns `machine` with its load shifted by `delta`. Throws InvalidResource
// if the result would be negative.
MachineSpec apply_load(const MachineSpec& machine, double delta);

// Aggregate solver throughput: sum of iter_rate_factor / (1 + load).
double clique_iteration_rate(const Clique& clique);

// Resource ad with Type, Name, CPUCount, minMemSize, totalMemSize,
// minCPUSpeed, maxCPULoad, domains, minLinkBandwidth, bisectionBandwidth,
// wanBandwidth, machineCount, opSys (undefined when members disagree) and
// LastUpdate.
classad::ClassAd derive_clique_ad(const Clique& clique, SimTime now);

struct Registration {
  Clique clique;
  double ttl_seconds = 0.0;
  SimTime last_refresh = 0.0;

  bool stale_at(SimTime now) const { return now > last_refresh + ttl_seconds; }
};

// Aggregate directory. Queries never return stale registrations, whether or
// not refresh() has run.
class Directory {
 public:
  // Adds or replaces the clique and re-arms its TTL.
  void register_clique(Clique clique, double ttl_seconds, SimTime now);
  bool deregister(const std::string& name);
  // Drops stale registrations. Idempotent for a fixed `now`.
  void refresh(SimTime now);

  // Live cliques ordered by name.
  std::vector<const Clique*> live(SimTime now) const;
  const Clique* find(const std::string& name, SimTime now) const;
  const Registration* registration(const std::string& name) const;

  // Shifts one machine's load; derived ads reflect it on next derivation.
  void apply_load(const std::string& clique, const std::string& machine, double delta);

  std::size_t size() const { return registrations_.size(); }
  // Bumped on every mutation that can change query results.
  std::uint64_t version() const { return version_; }

 private:
  std::map<std::string, Registration> registrations_;
  std::uint64_t version_ = 0;
};

}  // namespace cworm

#endif  // CWORM_RESOURCES_H_
