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

#include "cworm/resources.h"

#include <algorithm>
#include <cmath>

namespace cworm {

void validate(const MachineSpec& m) {
  if (m.name.empty()) throw InvalidResource("machine has no name");
  if (m.cpu_count < 1) throw InvalidResource("machine " + m.name + ": cpu count must be >= 1");
  if (!(m.cpu_speed_mhz > 0)) throw InvalidResource("machine " + m.name + ": cpu speed must be > 0");
  if (m.mem_bytes <= 0) throw InvalidResource("machine " + m.name + ": memory must be > 0");
  if (!(m.load >= 0)) throw InvalidResource("machine " + m.name + ": load must be >= 0");
  if (!(m.iter_rate_factor > 0))
    throw InvalidResource("machine " + m.name + ": iteration rate factor must be > 0");
}

void validate(const Clique& c) {
  if (c.name.empty()) throw InvalidResource("clique has no name");
  if (c.members.empty()) throw InvalidResource("clique " + c.name + " has no members");
  if (!(c.link_bandwidth_mbps > 0)) throw InvalidResource("clique " + c.name + ": link bandwidth must be > 0");
  if (!(c.wan_bandwidth_mbps > 0)) throw InvalidResource("clique " + c.name + ": WAN bandwidth must be > 0");
  for (const auto& m : c.members) validate(m);
}

MachineSpec apply_load(const MachineSpec& machine, double delta) {
  double load = machine.load + delta;
  if (!(load >= 0))
    throw InvalidResource("machine " + machine.name + ": load would become negative");
  MachineSpec out = machine;
  out.load = load;
  return out;
}

double clique_iteration_rate(const Clique& clique) {
  double rate = 0.0;
  for (const auto& m : clique.members) rate += m.iter_rate_factor / (1.0 + m.load);
  return rate;
}

classad::ClassAd derive_clique_ad(const Clique& clique, SimTime now) {
  using classad::Value;
  std::int64_t cpus = 0;
  std::int64_t total_mem = 0;
  std::int64_t min_mem = clique.members.front().mem_bytes;
  double min_speed = clique.members.front().cpu_speed_mhz;
  double max_load = clique.members.front().load;
  classad::ValueList domains;
  std::vector<std::string> seen;
  bool same_os = true;
  for (const auto& m : clique.members) {
    cpus += m.cpu_count;
    total_mem += m.mem_bytes;
    min_mem = std::min(min_mem, m.mem_bytes);
    min_speed = std::min(min_speed, m.cpu_speed_mhz);
    max_load = std::max(max_load, m.load);
    std::string key = classad::to_lower(m.domain);
    if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
      seen.push_back(key);
      domains.emplace_back(m.domain);
    }
    same_os = same_os && classad::iequals(m.op_sys, clique.members.front().op_sys);
  }
  auto n = static_cast<double>(clique.members.size());

  classad::ClassAd ad;
  ad.set("Type", Value("resource"));
  ad.set("Name", Value(clique.name));
  ad.set("CPUCount", Value(cpus));
  ad.set("minMemSize", Value(min_mem));
  ad.set("totalMemSize", Value(total_mem));
  ad.set("minCPUSpeed", Value(min_speed));
  ad.set("maxCPULoad", Value(max_load));
  ad.set("domains", Value(std::move(domains)));
  ad.set("minLinkBandwidth", Value(clique.link_bandwidth_mbps));
  ad.set("bisectionBandwidth", Value(clique.link_bandwidth_mbps * std::floor(n / 2.0)));
  ad.set("wanBandwidth", Value(clique.wan_bandwidth_mbps));
  ad.set("machineCount", Value(static_cast<std::int64_t>(clique.members.size())));
  ad.set("opSys", same_os ? Value(clique.members.front().op_sys) : Value(classad::Undefined{}));
  ad.set("LastUpdate", Value(now));
  return ad;
}

void Directory::register_clique(Clique clique, double ttl_seconds, SimTime now) {
  validate(clique);
  if (!(ttl_seconds > 0)) throw InvalidResource("clique " + clique.name + ": ttl must be > 0");
  std::string name = clique.name;
  registrations_[name] = Registration{std::move(clique), ttl_seconds, now};
  ++version_;
}

bool Directory::deregister(const std::string& name) {
  bool erased = registrations_.erase(name) > 0;
  if (erased) ++version_;
  return erased;
}

void Directory::refresh(SimTime now) {
  bool changed = false;
  for (auto it = registrations_.begin(); it != registrations_.end();) {
    if (it->second.stale_at(now)) {
      it = registrations_.erase(it);
      changed = true;
    } else {
      ++it;
    }
  }
  if (changed) ++version_;
}

std::vector<const Clique*> Directory::live(SimTime now) const {
  std::vector<const Clique*> out;
  for (const auto& [name, reg] : registrations_)
    if (!reg.stale_at(now)) out.push_back(&reg.clique);
  return out;
}

const Clique* Directory::find(const std::string& name, SimTime now) const {
  auto it = registrations_.find(name);
  if (it == registrations_.end() || it->second.stale_at(now)) return nullptr;
  return &it->second.clique;
}

const Registration* Directory::registration(const std::string& name) const {
  auto it = registrations_.find(name);
  return it == registrations_.end() ? nullptr : &it->second;
}

void Directory::apply_load(const std::string& clique, const std::string& machine, double delta) {
  auto it = registrations_.find(clique);
  if (it == registrations_.end()) throw InvalidResource("unknown clique " + clique);
  for (auto& m : it->second.clique.members) {
    if (m.name == machine) {
      m = cworm::apply_load(m, delta);
      ++version_;
      return;
    }
  }
  throw InvalidResource("clique " + clique + " has no machine " + machine);
}

}  // namespace cworm
