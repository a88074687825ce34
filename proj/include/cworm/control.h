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

// JSON-over-HTTP control surface for a live engine or a recorded metrics log.
//
//   GET  /status              run snapshot
//   GET  /metrics?since=N     metrics records with seq >= N
//   GET  /resources           live cliques with their rank
//   POST /contract            {"quantum"?, "threshold"?, "consecutive"?}
//   POST /migrate             {"target"?}
//   POST /pause, /resume      empty body
//
// All bodies are application/json. Errors are {"error": message}.

#ifndef CWORM_CONTROL_H_
#define CWORM_CONTROL_H_

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "cworm/sim.h"

namespace httplib {
class Server;
}

namespace cworm {

struct HttpResponse {
  int status = 200;
  std::string body;
};

class ControlPlane {
 public:
  // Live mode: reads take snapshots, mutations are queued on the engine.
  explicit ControlPlane(Engine& engine);
  // Replay mode: read-only; every POST answers 409.
  explicit ControlPlane(std::vector<MetricsRecord> recorded);
  ~ControlPlane();

  ControlPlane(const ControlPlane&) = delete;
  ControlPlane& operator=(const ControlPlane&) = delete;

  // Transport-independent dispatch; `query` holds the raw "since" value if any.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& query,
                      const std::string& body);

  // Binds (port 0 picks a free one) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

  bool live() const { return engine_ != nullptr; }

 private:
  HttpResponse status() const;
  HttpResponse metrics(const std::string& since) const;
  HttpResponse resources() const;
  HttpResponse command(const ControlCommand& cmd);

  Engine* engine_ = nullptr;
  std::vector<MetricsRecord> recorded_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace cworm

#endif  // CWORM_CONTROL_H_
