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

// Scenario file parsing and metrics log serialization.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cworm/sim.h"
#include "json.hpp"

namespace cworm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kStartRun: return "start_run";
    case EventKind::kInjectLoad: return "inject_load";
    case EventKind::kRegisterClique: return "register_clique";
    case EventKind::kDeregisterClique: return "deregister_clique";
    case EventKind::kKillSource: return "kill_source";
    case EventKind::kPurgeDeadline: return "purge_deadline";
    case EventKind::kManualMigrate: return "manual_migrate";
    case EventKind::kSetContract: return "set_contract";
    case EventKind::kAnnotation: return "annotation";
  }
  return "?";
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double parse_real(const std::string& s, int line, const std::string& what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw ScenarioError("bad number for " + what + ": '" + s + "'", line);
  return v;
}

std::int64_t parse_int(const std::string& s, int line, const std::string& what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ScenarioError("bad integer for " + what + ": '" + s + "'", line);
  return v;
}

// Integer with an optional K/M/G binary suffix.
std::int64_t parse_size(const std::string& s, int line, const std::string& what) {
  if (s.empty()) throw ScenarioError("empty size for " + what, line);
  int shift = 0;
  std::string digits = s;
  switch (s.back()) {
    case 'K': case 'k': shift = 10; break;
    case 'M': case 'm': shift = 20; break;
    case 'G': case 'g': shift = 30; break;
    default: break;
  }
  if (shift) digits.pop_back();
  std::int64_t v = parse_int(digits, line, what);
  if (v < 0 || v > (INT64_MAX >> shift)) throw ScenarioError("size out of range for " + what, line);
  return v << shift;
}

bool parse_bool(const std::string& s, int line, const std::string& what) {
  std::string l = classad::to_lower(s);
  if (l == "true" || l == "yes" || l == "1") return true;
  if (l == "false" || l == "no" || l == "0") return false;
  throw ScenarioError("bad boolean for " + what + ": '" + s + "'", line);
}

// "HH:MM" or "HH:MM:SS" to seconds of day.
std::optional<double> parse_clock(const std::string& s) {
  int h = 0, m = 0, sec = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  in >> h >> c1 >> m;
  if (!in || c1 != ':') return std::nullopt;
  if (in >> c2) {
    if (c2 != ':' || !(in >> sec)) return std::nullopt;
  }
  std::string rest;
  if (in >> rest) return std::nullopt;
  if (h < 0 || h > 47 || m < 0 || m > 59 || sec < 0 || sec > 59) return std::nullopt;
  return h * 3600.0 + m * 60.0 + sec;
}

class Parser {
 public:
  Parser(const std::string& text, fs::path base) : base_(std::move(base)) {
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) lines_.push_back(l);
  }

  Scenario parse() {
    std::string section = "";
    std::string clique_name;
    bool saw_version = false, saw_end = false, saw_request = false;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
      line_ = static_cast<int>(i + 1);
      std::string l = trim(lines_[i]);
      if (l.empty() || l[0] == '#') continue;
      if (l.front() == '[' && l.back() == ']') {
        auto words = split_ws(l.substr(1, l.size() - 2));
        if (words.empty()) fail("empty section header");
        section = words[0];
        if (section == "clique") {
          if (words.size() != 2) fail("expected [clique NAME]");
          clique_name = words[1];
          for (const auto& d : s_.cliques)
            if (d.clique.name == clique_name) fail("duplicate clique " + clique_name);
          s_.cliques.push_back(CliqueDef{Clique{clique_name, {}, 1, 1}, 1e9, true});
        } else if (words.size() != 1) {
          fail("unexpected words in section header");
        } else if (section == "contract" || section == "workload" || section == "transfer" ||
                   section == "request" || section == "events") {
          if (!sections_.insert(section).second) fail("duplicate section [" + section + "]");
        } else {
          fail("unknown section [" + section + "]");
        }
        continue;
      }
      if (section == "events") {
        parse_event(l);
        continue;
      }
      auto eq = l.find('=');
      if (eq == std::string::npos) fail("expected key = value");
      std::string key = trim(l.substr(0, eq));
      std::string value = trim(l.substr(eq + 1));
      if (section.empty()) {
        top_level(key, value, saw_version, saw_end);
      } else if (section == "contract") {
        contract(key, value);
      } else if (section == "workload") {
        workload(key, value);
      } else if (section == "transfer") {
        transfer(key, value);
      } else if (section == "clique") {
        clique(s_.cliques.back(), key, value);
      } else if (section == "request") {
        saw_request = true;
        request(key, value, i);
      }
    }
    line_ = 0;
    if (!saw_version) fail("missing version");
    if (!saw_end) fail("missing end");
    if (!saw_request) fail("missing [request]");
    validate_all();
    return std::move(s_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ScenarioError(what, line_); }

  void once(const std::string& section, const std::string& key) {
    if (key == "machine" || key == "hop") return;
    if (!seen_keys_.insert(section + "." + key).second) fail("duplicate key " + key);
  }

  void top_level(const std::string& key, const std::string& v, bool& saw_version, bool& saw_end) {
    once("", key);
    if (key == "version") {
      s_.version = static_cast<int>(parse_int(v, line_, key));
      if (s_.version != kScenarioVersion) fail("unsupported scenario version " + v);
      saw_version = true;
    } else if (key == "name") {
      s_.name = v;
    } else if (key == "run_id") {
      if (v.empty() || v.find_first_of("/\\ ") != std::string::npos) fail("bad run_id");
      s_.run_id = v;
    } else if (key == "end") {
      s_.end_time = time_value(v);
      if (!(s_.end_time > 0)) fail("end must be positive");
      saw_end = true;
    } else if (key == "origin") {
      if (!parse_clock(v)) fail("origin must be HH:MM or HH:MM:SS");
      if (saw_end || !s_.events.empty()) fail("origin must come before end and events");
      s_.clock_origin = v;
    } else {
      fail("unknown key " + key);
    }
  }

  void contract(const std::string& key, const std::string& v) {
    once("contract", key);
    if (key == "quantum") s_.contract.quantum_seconds = parse_real(v, line_, key);
    else if (key == "threshold") s_.contract.degradation_threshold = parse_real(v, line_, key);
    else if (key == "consecutive") s_.contract.consecutive_required = static_cast<int>(parse_int(v, line_, key));
    else fail("unknown key " + key);
  }

  void workload(const std::string& key, const std::string& v) {
    once("workload", key);
    auto& w = s_.workload;
    if (key == "dims") {
      auto parts = split_ws(v);
      if (parts.size() != 3) fail("dims needs three integers");
      for (int i = 0; i < 3; ++i) {
        auto d = parse_int(parts[i], line_, key);
        if (d < 1 || d > 4096) fail("dims out of range");
        w.dims[i] = static_cast<int>(d);
      }
    } else if (key == "alpha") {
      w.alpha = parse_real(v, line_, key);
    } else if (key == "seed") {
      w.seed = static_cast<std::uint64_t>(parse_int(v, line_, key));
    } else if (key == "iterations") {
      auto n = parse_int(v, line_, key);
      if (n < 0) fail("iterations must be >= 0");
      w.iterations = static_cast<std::uint64_t>(n);
    } else if (key == "backup_interval") {
      w.backup_interval = parse_real(v, line_, key);
      if (w.backup_interval < 0) fail("backup_interval must be >= 0");
    } else if (key == "backup_retention") {
      w.backup_retention = static_cast<int>(parse_int(v, line_, key));
      if (w.backup_retention < 1) fail("backup_retention must be >= 1");
    } else if (key == "migrate_on_better") {
      w.migrate_on_better = parse_bool(v, line_, key);
    } else {
      fail("unknown key " + key);
    }
  }

  void transfer(const std::string& key, const std::string& v) {
    once("transfer", key);
    auto& t = s_.transfer;
    if (key == "overhead") t.per_hop_overhead_seconds = parse_real(v, line_, key);
    else if (key == "disk_write") t.disk_write_mbps = parse_real(v, line_, key);
    else if (key == "restart_latency") t.restart_latency_seconds = parse_real(v, line_, key);
    else if (key == "direct") t.direct = parse_bool(v, line_, key);
    else if (key == "max_attempts") t.max_transfer_attempts = static_cast<int>(parse_int(v, line_, key));
    else if (key == "checkpoint_size") t.modeled_checkpoint_bytes = static_cast<std::uint64_t>(parse_size(v, line_, key));
    else if (key == "evacuation_margin") s_.evacuation_margin = parse_real(v, line_, key);
    else if (key == "hop") {
      auto parts = split_ws(v);
      if (parts.size() != 3) fail("hop needs FROM TO MBPS");
      double bw = parse_real(parts[2], line_, key);
      if (!(bw > 0)) fail("hop bandwidth must be positive");
      hops_.push_back({parts[0], parts[1], line_});
      t.hop_bandwidth_mbps[{parts[0], parts[1]}] = bw;
    } else {
      fail("unknown key " + key);
    }
    if (t.per_hop_overhead_seconds < 0 || t.disk_write_mbps < 0 || t.restart_latency_seconds < 0 ||
        t.max_transfer_attempts < 1 || s_.evacuation_margin < 0)
      fail("transfer values out of range");
  }

  void clique(CliqueDef& d, const std::string& key, const std::string& v) {
    once("clique " + d.clique.name, key);
    if (key == "ttl") {
      d.ttl_seconds = parse_real(v, line_, key);
      if (!(d.ttl_seconds > 0)) fail("ttl must be positive");
    } else if (key == "link") {
      d.clique.link_bandwidth_mbps = parse_real(v, line_, key);
    } else if (key == "wan") {
      d.clique.wan_bandwidth_mbps = parse_real(v, line_, key);
    } else if (key == "registered") {
      d.registered_at_start = parse_bool(v, line_, key);
    } else if (key == "machine") {
      machines(d.clique, v);
    } else {
      fail("unknown key " + key);
    }
  }

  // name=N domain=D os=O cpus=C mhz=S mem=M load=L rate=F [count=K]
  void machines(Clique& c, const std::string& v) {
    MachineSpec m;
    int count = 1;
    std::set<std::string> seen;
    for (const auto& word : split_ws(v)) {
      auto eq = word.find('=');
      if (eq == std::string::npos) fail("machine fields are key=value");
      std::string k = word.substr(0, eq), val = word.substr(eq + 1);
      if (!seen.insert(k).second) fail("duplicate machine field " + k);
      if (k == "name") m.name = val;
      else if (k == "domain") m.domain = val;
      else if (k == "os") m.op_sys = val;
      else if (k == "cpus") m.cpu_count = static_cast<int>(parse_int(val, line_, k));
      else if (k == "mhz") m.cpu_speed_mhz = parse_real(val, line_, k);
      else if (k == "mem") m.mem_bytes = parse_size(val, line_, k);
      else if (k == "load") m.load = parse_real(val, line_, k);
      else if (k == "rate") m.iter_rate_factor = parse_real(val, line_, k);
      else if (k == "count") count = static_cast<int>(parse_int(val, line_, k));
      else fail("unknown machine field " + k);
    }
    for (const char* req : {"name", "domain", "os", "cpus", "mhz", "mem", "rate"})
      if (!seen.count(req)) fail(std::string("machine is missing ") + req);
    if (count < 1 || count > 10000) fail("count out of range");
    for (int i = 0; i < count; ++i) {
      MachineSpec copy = m;
      if (count > 1) copy.name += std::to_string(i);
      try {
        validate(copy);
      } catch (const InvalidResource& e) {
        fail(e.what());
      }
      c.members.push_back(copy);
    }
  }

  void request(const std::string& key, const std::string& v, std::size_t& i) {
    once("request", key);
    if (key == "file") {
      std::ifstream in(base_ / v);
      if (!in) fail("cannot read request file " + v);
      std::stringstream ss;
      ss << in.rdbuf();
      s_.request_text = ss.str();
    } else if (key == "ad") {
      if (v.rfind("<<", 0) != 0 || v.size() < 3) fail("ad must be a heredoc: ad = <<TAG");
      std::string tag = v.substr(2);
      std::string text;
      std::size_t j = i + 1;
      for (; j < lines_.size() && trim(lines_[j]) != tag; ++j) text += lines_[j] + "\n";
      if (j == lines_.size()) fail("unterminated heredoc " + tag);
      i = j;
      s_.request_text = text;
    } else {
      fail("unknown key " + key);
    }
    if (!s_.request_text.empty() && key == "file" && seen_keys_.count("request.ad")) fail("request given twice");
    if (key == "ad" && seen_keys_.count("request.file")) fail("request given twice");
  }

  SimTime time_value(const std::string& v) {
    if (v.find(':') != std::string::npos) {
      if (!s_.clock_origin) fail("clock times need an origin");
      auto t = parse_clock(v);
      if (!t) fail("bad clock time " + v);
      double rel = *t - *parse_clock(*s_.clock_origin);
      if (rel < 0) fail("clock time before origin");
      return rel;
    }
    double t = parse_real(v, line_, "time");
    if (t < 0) fail("negative time");
    return t;
  }

  void parse_event(const std::string& l) {
    auto words = split_ws(l);
    if (words.size() < 3 || words[0] != "at") fail("expected: at TIME KIND ARGS...");
    ScenarioEvent e;
    e.line = line_;
    e.time = time_value(words[1]);
    static const std::map<std::string, EventKind> kinds = {
        {"start_run", EventKind::kStartRun},           {"inject_load", EventKind::kInjectLoad},
        {"register_clique", EventKind::kRegisterClique}, {"deregister_clique", EventKind::kDeregisterClique},
        {"kill_source", EventKind::kKillSource},       {"purge_deadline", EventKind::kPurgeDeadline},
        {"manual_migrate", EventKind::kManualMigrate}, {"set_contract", EventKind::kSetContract},
        {"annotation", EventKind::kAnnotation},
    };
    auto it = kinds.find(words[2]);
    if (it == kinds.end()) fail("unknown event kind " + words[2]);
    e.kind = it->second;
    if (e.kind == EventKind::kAnnotation) {
      auto pos = l.find(words[2]) + words[2].size();
      std::string text = trim(l.substr(pos));
      if (text.empty()) fail("annotation needs text");
      e.args = {text};
    } else {
      e.args.assign(words.begin() + 3, words.end());
    }
    if (e.kind == EventKind::kPurgeDeadline && e.args.size() == 2) e.args[1] = std::to_string(time_value(e.args[1]));
    s_.events.push_back(std::move(e));
  }

  bool known_clique(const std::string& n) const {
    return std::any_of(s_.cliques.begin(), s_.cliques.end(), [&](const CliqueDef& d) { return d.clique.name == n; });
  }

  void validate_all() {
    try {
      validate(s_.contract);
    } catch (const ContractError& e) {
      fail(std::string("[contract] ") + e.what());
    }
    if (s_.workload.backup_interval > 0 && s_.workload.backup_retention < 1) fail("backup_retention must be >= 1");
    for (const auto& d : s_.cliques) {
      try {
        validate(d.clique);
      } catch (const InvalidResource& e) {
        fail("clique " + d.clique.name + ": " + e.what());
      }
    }
    for (const auto& [from, to, line] : hops_) {
      line_ = line;
      for (const auto& site : {from, to})
        if (site != kStoreSite && !known_clique(site)) fail("hop names unknown site " + site);
    }
    try {
      s_.request = classad::parse_ad(s_.request_text);
    } catch (const std::exception& e) {
      line_ = 0;
      fail(std::string("[request] ") + e.what());
    }
    if (!s_.request.contains(classad::kRequirementsAttr)) fail("[request] ad has no requirements");

    int starts = 0;
    for (const auto& e : s_.events) {
      line_ = e.line;
      if (e.time > s_.end_time) fail("event after end");
      auto arity = [&](std::size_t lo, std::size_t hi) {
        if (e.args.size() < lo || e.args.size() > hi) fail(std::string("wrong number of arguments for ") + to_string(e.kind));
      };
      switch (e.kind) {
        case EventKind::kStartRun:
          arity(0, 0);
          if (++starts > 1) fail("more than one start_run");
          break;
        case EventKind::kInjectLoad: {
          arity(3, 3);
          auto c = std::find_if(s_.cliques.begin(), s_.cliques.end(),
                                [&](const CliqueDef& d) { return d.clique.name == e.args[0]; });
          if (c == s_.cliques.end()) fail("unknown clique " + e.args[0]);
          bool found = std::any_of(c->clique.members.begin(), c->clique.members.end(),
                                   [&](const MachineSpec& m) { return m.name == e.args[1]; });
          if (!found) fail("unknown machine " + e.args[1] + " in " + e.args[0]);
          parse_real(e.args[2], e.line, "load delta");
          break;
        }
        case EventKind::kRegisterClique:
        case EventKind::kDeregisterClique:
          arity(1, 1);
          if (!known_clique(e.args[0])) fail("unknown clique " + e.args[0]);
          break;
        case EventKind::kKillSource:
          arity(1, 1);
          if (e.args[0] != "graceful" && e.args[0] != "crash") fail("kill_source takes graceful or crash");
          break;
        case EventKind::kPurgeDeadline:
          arity(2, 2);
          if (!known_clique(e.args[0])) fail("unknown site " + e.args[0]);
          parse_real(e.args[1], e.line, "deadline");
          break;
        case EventKind::kManualMigrate:
          arity(0, 1);
          break;
        case EventKind::kSetContract:
          if (e.args.empty()) fail("set_contract needs key=value arguments");
          for (const auto& a : e.args) {
            auto eq = a.find('=');
            std::string k = a.substr(0, eq);
            if (eq == std::string::npos || (k != "quantum" && k != "threshold" && k != "consecutive"))
              fail("set_contract takes quantum=, threshold=, consecutive=");
            double v = parse_real(a.substr(eq + 1), e.line, k);
            ContractParams p = s_.contract;
            if (k == "quantum") p.quantum_seconds = v;
            if (k == "threshold") p.degradation_threshold = v;
            if (k == "consecutive") {
              if (v != std::floor(v)) fail("consecutive must be an integer");
              p.consecutive_required = static_cast<int>(v);
            }
            try {
              validate(p);
            } catch (const ContractError& ex) {
              fail(std::string("set_contract: ") + ex.what());
            }
          }
          break;
        case EventKind::kAnnotation:
          break;
      }
    }
    line_ = 0;
    if (starts == 0) s_.events.insert(s_.events.begin(), ScenarioEvent{0, EventKind::kStartRun, {}, 0});
    std::stable_sort(s_.events.begin(), s_.events.end(),
                     [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.time < b.time; });
  }

  struct HopRef {
    std::string from, to;
    int line;
  };

  fs::path base_;
  std::vector<std::string> lines_;
  int line_ = 0;
  Scenario s_;
  std::set<std::string> sections_;
  std::set<std::string> seen_keys_;
  std::vector<HopRef> hops_;
};

std::string format_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const fs::path& base_dir) { return Parser(text, base_dir).parse(); }

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot read scenario " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  Scenario s = parse_scenario(ss.str(), path.parent_path());
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

// -- Logs ------------------------------------------------------------------------------

std::string to_json_line(const MetricsRecord& r) {
  json j;
  j["seq"] = r.seq;
  j["time"] = r.time;
  j["quantum"] = r.quantum;
  j["clique"] = r.clique;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["rate"] = opt(r.rate);
  j["average"] = opt(r.average);
  j["degradation"] = opt(r.degradation);
  j["violation"] = r.violation;
  j["trigger"] = r.trigger;
  j["migration"] = r.migration;
  j["event"] = r.event.empty() ? json(nullptr) : json(r.event);
  j["detail"] = r.detail.empty() ? json(nullptr) : json(r.detail);
  return j.dump();
}

MetricsRecord metrics_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed metrics record: ") + e.what());
  }
  try {
    MetricsRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.time = j.at("time").get<double>();
    r.quantum = j.at("quantum").get<std::int64_t>();
    r.clique = j.at("clique").get<std::string>();
    auto opt = [&](const char* k) -> std::optional<double> {
      if (!j.contains(k) || j[k].is_null()) return std::nullopt;
      return j[k].get<double>();
    };
    r.rate = opt("rate");
    r.average = opt("average");
    r.degradation = opt("degradation");
    r.violation = j.value("violation", false);
    r.trigger = j.value("trigger", false);
    r.migration = j.value("migration", false);
    if (j.contains("event") && !j["event"].is_null()) r.event = j["event"].get<std::string>();
    if (j.contains("detail") && !j["detail"].is_null()) r.detail = j["detail"].get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed metrics record: ") + e.what());
  }
}

std::vector<MetricsRecord> read_metrics_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read metrics log " + path.string());
  std::vector<MetricsRecord> out;
  int n = 0;
  for (std::string l; std::getline(in, l);) {
    ++n;
    if (trim(l).empty()) continue;
    try {
      out.push_back(metrics_from_json(l));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string export_plot_data(const std::vector<MetricsRecord>& metrics) {
  std::string out = "time\tquantum\tclique\trate\tviolation\tmigration\n";
  for (const auto& r : metrics) {
    if (!r.is_quantum()) continue;
    out += format_double(r.time) + "\t" + std::to_string(r.quantum) + "\t" + r.clique + "\t" +
           format_double(r.rate.value_or(0)) + "\t" + (r.violation ? "1" : "0") + "\t" + (r.migration ? "1" : "0") +
           "\n";
  }
  return out;
}

std::string clock_label(const std::string& origin, SimTime t) {
  auto base = parse_clock(origin);
  if (!base) throw std::invalid_argument("bad clock origin " + origin);
  auto total = static_cast<long long>(std::floor(*base + t));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", total / 3600, (total / 60) % 60, total % 60);
  return buf;
}

}  // namespace cworm
