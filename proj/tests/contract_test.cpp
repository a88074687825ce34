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

#include <random>

#include "doctest.h"
#include "oracles.h"

using namespace cworm;

namespace {

ContractParams params(double threshold, int n) { return ContractParams{1.0, threshold, n}; }

std::vector<QuantumVerdict> replay(const std::vector<double>& rates, const ContractParams& p) {
  auto m = ContractMonitor::init(rates.at(0), p);
  for (std::size_t i = 1; i < rates.size(); ++i) m.observe_rate(rates[i]);
  return m.history();
}

}  // namespace

TEST_CASE("init") {
  auto m = ContractMonitor::init(10.0, ContractParams{});
  CHECK(m.average() == 10.0);
  CHECK(m.consecutive_violations() == 0);
  CHECK(m.quantum_index() == 1);
  CHECK_FALSE(m.history().front().violation);
  CHECK_THROWS_AS(ContractMonitor::init(0.0, ContractParams{}), ContractError);
  CHECK_THROWS_AS(ContractMonitor::init(-1.0, ContractParams{}), ContractError);

  auto c = ContractMonitor::init(3.7, ContractParams{});
  CHECK_FALSE(c.observe_rate(3.7).violation);
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(validate(ContractParams{}));
  CHECK_THROWS_AS(validate(ContractParams{0.0, 0.1, 3}), ContractError);
  CHECK_THROWS_AS(validate(ContractParams{1.0, 0.0, 3}), ContractError);
  CHECK_THROWS_AS(validate(ContractParams{1.0, 1.0, 3}), ContractError);
  CHECK_THROWS_AS(validate(ContractParams{1.0, 0.1, 0}), ContractError);
}

TEST_CASE("load at quantum 7 is detected at 8, 9, 10") {
  auto h = replay({10, 10, 10, 10, 10, 10, 10, 6, 6, 6}, params(0.10, 3));
  REQUIRE(h.size() == 10);
  for (int q = 1; q <= 7; ++q) CHECK_FALSE(h[q - 1].violation);
  for (int q = 8; q <= 10; ++q) {
    CHECK(h[q - 1].violation);
    CHECK(h[q - 1].degradation == doctest::Approx(0.4));
  }
  CHECK_FALSE(h[7].trigger);
  CHECK_FALSE(h[8].trigger);
  CHECK(h[9].trigger);
  for (const auto& v : h) CHECK(v.average == 10.0);
}

TEST_CASE("violation, recovery, then a run of three") {
  auto m = ContractMonitor::init(10, params(0.15, 3));
  CHECK_FALSE(m.observe_rate(10).violation);
  auto q3 = m.observe_rate(8);
  CHECK(q3.violation);
  CHECK(q3.degradation == doctest::Approx(0.20));
  CHECK_FALSE(m.observe_rate(10).violation);
  CHECK(m.consecutive_violations() == 0);
  CHECK(m.average() == 10.0);
  CHECK_FALSE(m.observe_rate(8).trigger);
  CHECK_FALSE(m.observe_rate(8).trigger);
  auto q7 = m.observe_rate(8);
  CHECK(q7.violation);
  CHECK(q7.trigger);
  CHECK(q7.index == 7);
}

TEST_CASE("threshold comparison is strict") {
  auto m = ContractMonitor::init(10, params(0.10, 3));
  auto v = m.observe_rate(9.1);
  CHECK(v.degradation == doctest::Approx(0.09));
  CHECK_FALSE(v.violation);
  // Exactly at the threshold is not a violation.
  auto e = ContractMonitor::init(8, params(0.25, 3));
  CHECK_FALSE(e.observe_rate(6).violation);
}

TEST_CASE("observe computes the rate from iterations and elapsed time") {
  auto m = ContractMonitor::init(10, params(0.10, 3));
  auto v = m.observe(50, 10.0);
  CHECK(v.rate == 5.0);
  CHECK(v.violation);
  CHECK_THROWS_AS(m.observe(10, 0.0), ContractError);
  CHECK_THROWS_AS(m.observe(10, -1.0), ContractError);
}

TEST_CASE("speedups never count as degradation") {
  auto m = ContractMonitor::init(10, params(0.10, 3));
  auto v = m.observe_rate(25);
  CHECK(v.degradation == 0.0);
  CHECK_FALSE(v.violation);
  CHECK(m.average() == 17.5);
}

TEST_CASE("runtime parameter changes") {
  SUBCASE("raising the threshold stops violations") {
    auto m = ContractMonitor::init(10, params(0.10, 3));
    CHECK(m.observe_rate(6).violation);
    m.set_params(params(0.50, 3));
    CHECK_FALSE(m.observe_rate(6).violation);
    CHECK_FALSE(m.observe_rate(6).violation);
    CHECK(m.consecutive_violations() == 0);
  }
  SUBCASE("lowering the count below the counter triggers on the next violation") {
    auto m = ContractMonitor::init(10, params(0.10, 3));
    m.observe_rate(6);
    m.observe_rate(6);
    CHECK(m.consecutive_violations() == 2);
    m.set_params(params(0.10, 1));
    CHECK(m.consecutive_violations() == 2);
    CHECK(m.observe_rate(6).trigger);
  }
  SUBCASE("quantum length change leaves indices alone") {
    auto m = ContractMonitor::init(10, params(0.10, 3));
    m.observe_rate(10);
    m.set_params(ContractParams{30.0, 0.10, 3});
    CHECK(m.observe_rate(10).index == 3);
    CHECK(m.params().quantum_seconds == 30.0);
  }
  SUBCASE("invalid params leave state unchanged") {
    auto m = ContractMonitor::init(10, params(0.10, 3));
    m.observe_rate(6);
    CHECK_THROWS_AS(m.set_params(params(1.5, 3)), ContractError);
    CHECK(m.params() == params(0.10, 3));
    CHECK(m.consecutive_violations() == 1);
  }
}

TEST_CASE("verdicts match the brute-force recomputation") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    std::uniform_int_distribution<int> len(1, 50);
    std::uniform_real_distribution<double> rate(0.5, 20.0);
    std::vector<double> rates(static_cast<std::size_t>(len(rng)));
    for (auto& r : rates) r = rate(rng);
    ContractParams p{1.0, std::uniform_real_distribution<double>(0.01, 0.6)(rng),
                     std::uniform_int_distribution<int>(1, 5)(rng)};
    CHECK(replay(rates, p) == oracle::brute_force_verdicts(rates, p));
  }
}

TEST_CASE("properties") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    ContractParams p{1.0, std::uniform_real_distribution<double>(0.01, 0.9)(rng),
                     std::uniform_int_distribution<int>(2, 5)(rng)};
    double base = std::uniform_real_distribution<double>(0.1, 100)(rng);
    // Constant traces never violate.
    auto constant = replay(std::vector<double>(30, base), p);
    for (const auto& v : constant) CHECK_FALSE(v.violation);
    // A single dip never triggers when two or more violations are required.
    std::vector<double> dip(20, base);
    dip[10] = base * 0.01;
    for (const auto& v : replay(dip, p)) CHECK_FALSE(v.trigger);
    // The reported average is the mean of the non-violating rates.
    std::vector<double> rates(40);
    for (auto& r : rates) r = std::uniform_real_distribution<double>(1, 10)(rng);
    auto m = ContractMonitor::init(rates[0], p);
    for (std::size_t i = 1; i < rates.size(); ++i) m.observe_rate(rates[i]);
    double sum = 0;
    int n = 0;
    for (const auto& v : m.history())
      if (!v.violation) {
        sum += v.rate;
        ++n;
      }
    CHECK(m.average() == doctest::Approx(sum / n).epsilon(1e-12));
    CHECK(m.consecutive_violations() <= m.quantum_index());
    // Determinism.
    CHECK(replay(rates, p) == m.history());
  }
}
