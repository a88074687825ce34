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

// Performance contract monitor.
//
// At the end of every time quantum the iteration rate is compared with the
// average rate of all earlier quanta that did not violate the contract. A
// quantum whose relative slowdown exceeds the threshold is a violation and
// is left out of the average. The monitor triggers when the run of
// consecutive violations reaches the configured count.

#ifndef CWORM_CONTRACT_H_
#define CWORM_CONTRACT_H_

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace cworm {

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ContractParams {
  double quantum_seconds = 1.0;
  // Fraction in (0, 1).
  double degradation_threshold = 0.10;
  int consecutive_required = 3;

  friend bool operator==(const ContractParams&, const ContractParams&) = default;
};

// Throws ContractError describing the first invalid field.
void validate(const ContractParams& params);

struct QuantumVerdict {
  std::int64_t index = 0;  // 1-based
  double rate = 0.0;       // iterations/s
  double average = 0.0;    // non-violating average the rate was judged against
  double degradation = 0.0;
  bool violation = false;
  bool trigger = false;

  friend bool operator==(const QuantumVerdict&, const QuantumVerdict&) = default;
};

class ContractMonitor {
 public:
  // Records the first quantum, which can never violate.
  static ContractMonitor init(double first_quantum_rate, const ContractParams& params);

  // Judges the quantum that just finished.
  QuantumVerdict observe(std::int64_t iterations_completed, double elapsed_seconds);
  QuantumVerdict observe_rate(double rate);

  // Takes effect from the next observe(); counters are kept. If the new
  // consecutive count is already met, the next violation triggers.
  void set_params(const ContractParams& params);

  const ContractParams& params() const { return params_; }
  double average() const { return non_violating_sum_ / static_cast<double>(non_violating_count_); }
  std::int64_t non_violating_count() const { return non_violating_count_; }
  int consecutive_violations() const { return consecutive_; }
  std::int64_t quantum_index() const { return quantum_index_; }
  const std::vector<QuantumVerdict>& history() const { return history_; }

 private:
  ContractMonitor(const ContractParams& params) : params_(params) {}

  ContractParams params_;
  double non_violating_sum_ = 0.0;
  std::int64_t non_violating_count_ = 0;
  int consecutive_ = 0;
  std::int64_t quantum_index_ = 0;
  bool trigger_armed_ = false;
  std::vector<QuantumVerdict> history_;
};

}  // namespace cworm

#endif  // CWORM_CONTRACT_H_
