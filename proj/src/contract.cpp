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

#include "cworm/contract.h"

#include <cmath>
#include <string>

namespace cworm {

void validate(const ContractParams& p) {
  if (!(p.quantum_seconds > 0) || !std::isfinite(p.quantum_seconds))
    throw ContractError("quantum_seconds must be a positive number");
  if (!(p.degradation_threshold > 0 && p.degradation_threshold < 1))
    throw ContractError("degradation_threshold must lie strictly between 0 and 1");
  if (p.consecutive_required < 1) throw ContractError("consecutive_required must be >= 1");
}

ContractMonitor ContractMonitor::init(double first_quantum_rate, const ContractParams& params) {
  validate(params);
  if (!(first_quantum_rate > 0) || !std::isfinite(first_quantum_rate))
    throw ContractError("first quantum rate must be positive, got " + std::to_string(first_quantum_rate));
  ContractMonitor m(params);
  m.non_violating_sum_ = first_quantum_rate;
  m.non_violating_count_ = 1;
  m.quantum_index_ = 1;
  m.history_.push_back(QuantumVerdict{1, first_quantum_rate, first_quantum_rate, 0.0, false, false});
  return m;
}

QuantumVerdict ContractMonitor::observe(std::int64_t iterations_completed, double elapsed_seconds) {
  if (!(elapsed_seconds > 0)) throw ContractError("elapsed time must be positive");
  if (iterations_completed < 0) throw ContractError("iteration count must be non-negative");
  return observe_rate(static_cast<double>(iterations_completed) / elapsed_seconds);
}

QuantumVerdict ContractMonitor::observe_rate(double rate) {
  QuantumVerdict v;
  v.index = ++quantum_index_;
  v.rate = rate;
  v.average = average();
  // Speedups are not degradation.
  v.degradation = v.average > rate ? (v.average - rate) / v.average : 0.0;
  v.violation = v.degradation > params_.degradation_threshold;
  if (v.violation) {
    ++consecutive_;
    v.trigger = consecutive_ == params_.consecutive_required ||
                (trigger_armed_ && consecutive_ > params_.consecutive_required);
    trigger_armed_ = false;
  } else {
    consecutive_ = 0;
    trigger_armed_ = false;
    non_violating_sum_ += rate;
    ++non_violating_count_;
  }
  history_.push_back(v);
  return v;
}

void ContractMonitor::set_params(const ContractParams& params) {
  validate(params);
  params_ = params;
  trigger_armed_ = consecutive_ > 0 && consecutive_ >= params.consecutive_required;
}

}  // namespace cworm
