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

// Independent reference computations used by unit and acceptance tests.
// Nothing here calls into the code paths it is used to check.

#ifndef CWORM_TESTS_ORACLES_H_
#define CWORM_TESTS_ORACLES_H_

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "cworm/contract.h"
#include "cworm/resources.h"

namespace cworm::oracle {

// Verdicts recomputed from scratch for every quantum: the average is the
// mean of all earlier non-violating rates, summed again each time.
inline std::vector<QuantumVerdict> brute_force_verdicts(const std::vector<double>& rates,
                                                        const ContractParams& params) {
  std::vector<QuantumVerdict> out;
  std::vector<bool> violated;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    QuantumVerdict v;
    v.index = static_cast<std::int64_t>(i + 1);
    v.rate = rates[i];
    if (i == 0) {
      v.average = rates[0];
    } else {
      double sum = 0;
      std::int64_t n = 0;
      for (std::size_t j = 0; j < i; ++j) {
        if (!violated[j]) {
          sum += rates[j];
          ++n;
        }
      }
      v.average = sum / static_cast<double>(n);
      v.degradation = std::max(0.0, (v.average - v.rate) / v.average);
      v.violation = v.degradation > params.degradation_threshold;
    }
    violated.push_back(v.violation);
    auto n = static_cast<std::size_t>(params.consecutive_required);
    if (v.violation && violated.size() >= n) {
      bool run = std::all_of(violated.end() - static_cast<std::ptrdiff_t>(n), violated.end(),
                             [](bool b) { return b; });
      bool before_clear = violated.size() == n || !violated[violated.size() - n - 1];
      v.trigger = run && before_clear;
    }
    out.push_back(v);
  }
  return out;
}

inline bool iequal(const std::string& a, const std::string& b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return std::tolower(x) == std::tolower(y); });
}

// Closed form of the worm request (all LINUX, minMem > 100G / cpus) plus,
// optionally, the sample request's domain inclusion. Returns the rank
// minSpeed * cpus / (maxLoad + 1) for matching cliques.
inline std::optional<double> closed_form_rank(const Clique& c, const std::vector<std::string>& required_domains) {
  std::int64_t cpus = 0, min_mem = INT64_MAX;
  double min_speed = 1e300, max_load = 0;
  for (const auto& m : c.members) {
    if (!iequal(m.op_sys, "LINUX")) return std::nullopt;
    cpus += m.cpu_count;
    min_mem = std::min(min_mem, m.mem_bytes);
    min_speed = std::min(min_speed, m.cpu_speed_mhz);
    max_load = std::max(max_load, m.load);
  }
  double per_cpu = 107374182400.0 / static_cast<double>(cpus);
  if (!(static_cast<double>(min_mem) > per_cpu)) return std::nullopt;
  for (const auto& d : required_domains) {
    bool found = std::any_of(c.members.begin(), c.members.end(), [&](const MachineSpec& m) { return iequal(m.domain, d); });
    if (!found) return std::nullopt;
  }
  return min_speed * static_cast<double>(cpus) / (max_load + 1);
}

// Straightforward 7-point Jacobi step with fixed boundary, written as a
// separate triple loop over an explicit copy.
inline std::vector<double> reference_jacobi(std::vector<double> field, std::array<int, 3> dims, double alpha,
                                            int steps) {
  auto at = [&](const std::vector<double>& f, int x, int y, int z) {
    return f[(static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z];
  };
  for (int s = 0; s < steps; ++s) {
    std::vector<double> next = field;
    for (int x = 1; x + 1 < dims[0]; ++x)
      for (int y = 1; y + 1 < dims[1]; ++y)
        for (int z = 1; z + 1 < dims[2]; ++z) {
          double c = at(field, x, y, z);
          double lap = (at(field, x - 1, y, z) - c) + (at(field, x + 1, y, z) - c) +
                       (at(field, x, y - 1, z) - c) + (at(field, x, y + 1, z) - c) +
                       (at(field, x, y, z - 1) - c) + (at(field, x, y, z + 1) - c);
          next[(static_cast<std::size_t>(x) * dims[1] + y) * dims[2] + z] = c + alpha * lap;
        }
    field = std::move(next);
  }
  return field;
}

// FNV-1a over the little-endian bytes of each double.
inline std::uint64_t field_digest(const std::vector<double>& field) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double d : field) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace cworm::oracle

#endif  // CWORM_TESTS_ORACLES_H_
