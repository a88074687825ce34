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

#include <charconv>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace cworm {

using json = nlohmann::ordered_json;

namespace {

HttpResponse reply(int status, const json& j) { return {status, j.dump()}; }
HttpResponse error(int status, const std::string& msg) { return reply(status, json{{"error", msg}}); }

json contract_json(const ContractParams& p) {
  return json{{"quantum", p.quantum_seconds},
              {"threshold", p.degradation_threshold},
              {"consecutive", p.consecutive_required}};
}

json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json j = json::parse(body);
  if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
  return j;
}

SetContractCommand contract_command(const json& j) {
  SetContractCommand c;
  for (const auto& [k, v] : j.items()) {
    if (k == "quantum") {
      if (!v.is_number()) throw std::invalid_argument("quantum must be a number");
      c.quantum_seconds = v.get<double>();
    } else if (k == "threshold") {
      if (!v.is_number()) throw std::invalid_argument("threshold must be a number");
      c.degradation_threshold = v.get<double>();
    } else if (k == "consecutive") {
      if (!v.is_number_integer()) throw std::invalid_argument("consecutive must be an integer");
      c.consecutive_required = v.get<int>();
    } else {
      throw std::invalid_argument("unknown field " + k);
    }
  }
  return c;
}

}  // namespace

ControlPlane::ControlPlane(Engine& engine) : engine_(&engine) {}
ControlPlane::ControlPlane(std::vector<MetricsRecord> recorded) : recorded_(std::move(recorded)) {}
ControlPlane::~ControlPlane() { stop(); }

HttpResponse ControlPlane::handle(const std::string& method, const std::string& path, const std::string& query,
                                  const std::string& body) {
  if (method == "GET") {
    if (path == "/status") return status();
    if (path == "/metrics") return metrics(query);
    if (path == "/resources") return resources();
    return error(404, "no such endpoint " + path);
  }
  if (method != "POST") return error(405, "method not allowed");
  if (path != "/contract" && path != "/migrate" && path != "/pause" && path != "/resume")
    return error(404, "no such endpoint " + path);
  if (!engine_) return error(409, "replay is read-only");
  try {
    json j = parse_body(body);
    if (path == "/contract") return command(contract_command(j));
    if (path == "/migrate") {
      MigrateCommand m;
      for (const auto& [k, v] : j.items()) {
        if (k != "target") throw std::invalid_argument("unknown field " + k);
        if (!v.is_null()) {
          if (!v.is_string()) throw std::invalid_argument("target must be a string");
          m.target = v.get<std::string>();
        }
      }
      return command(m);
    }
    if (!j.empty()) throw std::invalid_argument("body must be empty");
    if (path == "/pause") return command(PauseCommand{});
    return command(ResumeCommand{});
  } catch (const json::exception& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    return error(400, e.what());
  }
}

HttpResponse ControlPlane::command(const ControlCommand& cmd) {
  auto ack = engine_->submit(cmd);
  if (!ack.accepted) return error(ack.http_status, ack.message);
  return reply(ack.http_status, json{{"accepted", true}, {"id", ack.id}, {"message", ack.message}});
}

HttpResponse ControlPlane::status() const {
  if (!engine_) {
    json j{{"mode", "replay"}, {"records", recorded_.size()}};
    if (!recorded_.empty()) {
      j["time"] = recorded_.back().time;
      j["quantum"] = recorded_.back().quantum;
      j["clique"] = recorded_.back().clique;
    }
    return reply(200, j);
  }
  auto s = engine_->status();
  json j{{"mode", "live"}, {"time", s.time}};
  if (!s.has_run) return reply(200, j);
  j["runId"] = s.run_id;
  j["status"] = s.status;
  j["clique"] = s.clique.empty() ? json(nullptr) : json(s.clique);
  j["iteration"] = s.iteration;
  j["quantum"] = s.quantum;
  j["contract"] = contract_json(s.contract);
  j["consecutiveViolations"] = s.consecutive_violations;
  j["paused"] = s.paused;
  return reply(200, j);
}

HttpResponse ControlPlane::metrics(const std::string& since) const {
  std::uint64_t from = 0;
  if (!since.empty()) {
    auto [p, ec] = std::from_chars(since.data(), since.data() + since.size(), from);
    if (ec != std::errc() || p != since.data() + since.size()) return error(400, "since must be a non-negative integer");
  }
  std::vector<MetricsRecord> rows;
  if (engine_) {
    rows = engine_->metrics_since(from);
  } else if (from < recorded_.size()) {
    rows.assign(recorded_.begin() + static_cast<std::ptrdiff_t>(from), recorded_.end());
  }
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(json::parse(to_json_line(r)));
  return reply(200, arr);
}

HttpResponse ControlPlane::resources() const {
  json arr = json::array();
  if (engine_) {
    for (const auto& r : engine_->resources()) {
      arr.push_back(json{{"name", r.name},
                         {"CPUCount", r.cpu_count},
                         {"minMemSize", r.min_mem_size},
                         {"maxCPULoad", r.max_cpu_load},
                         {"rank", r.rank},
                         {"matches", r.matches},
                         {"current", r.current}});
    }
  }
  return reply(200, arr);
}

int ControlPlane::start(const std::string& host, int port) {
  stop();
  server_ = std::make_unique<httplib::Server>();
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    auto r = handle(req.method, req.path, req.has_param("since") ? req.get_param_value("since") : "", req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  for (const char* p : {"/status", "/metrics", "/resources"}) server_->Get(p, route);
  for (const char* p : {"/contract", "/migrate", "/pause", "/resume"}) server_->Post(p, route);
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    server_.reset();
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([s = server_.get()] { s->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ControlPlane::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace cworm
