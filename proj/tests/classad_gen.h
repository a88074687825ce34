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

// Random expression/ad generators for property tests.

#ifndef CWORM_TESTS_CLASSAD_GEN_H_
#define CWORM_TESTS_CLASSAD_GEN_H_

#include <random>
#include <string>
#include <vector>

#include "cworm/classad.h"

namespace cworm::testing {

class AdGenerator {
 public:
  explicit AdGenerator(std::uint64_t seed) : rng_(seed) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  classad::Value literal() {
    switch (uniform(0, 7)) {
      case 0: return classad::Value(uniform(0, 1) == 1);
      case 1: return classad::Value(static_cast<std::int64_t>(uniform(-1000, 1000)));
      case 2: return classad::Value(std::int64_t{1} << uniform(0, 62));
      case 3: return classad::Value(static_cast<double>(uniform(-100000, 100000)) / 64.0);
      case 4: return classad::Value(word());
      case 5: return classad::Value(classad::Undefined{});
      case 6: return classad::Value(classad::Error{});
      default: return classad::Value(static_cast<double>(uniform(1, 9)) * 1e-7);
    }
  }

  std::string word() {
    static const char* kWords[] = {"LINUX", "linux", "IRIX", "cs.uiuc.edu", "ucsd.edu",
                                   "a\"b", "", "x y", "back\\slash", "tab\t"};
    return kWords[uniform(0, 9)];
  }

  std::string name() {
    static const char* kNames[] = {"a", "b", "c", "CPUCount", "cpucount", "opSys",
                                   "minMemSize", "domains", "rank", "requirements"};
    return kNames[uniform(0, 9)];
  }

  classad::Expr expression(int depth) {
    using namespace classad;
    int choice = depth <= 0 ? uniform(0, 1) : uniform(0, 6);
    switch (choice) {
      case 0: return make_literal(literal());
      case 1: {
        Scope scope = static_cast<Scope>(uniform(0, 2));
        return make_ref(scope, name());
      }
      case 2: return make_unary(static_cast<UnaryOp>(uniform(0, 1)), expression(depth - 1));
      case 3:
      case 4:
        return make_binary(static_cast<BinaryOp>(uniform(0, 11)), expression(depth - 1),
                           expression(depth - 1));
      case 5: {
        std::vector<Expr> args;
        int n = uniform(0, 3);
        for (int i = 0; i < n; ++i) args.push_back(expression(depth - 1));
        return make_call(uniform(0, 3) == 0 ? "Bogus" : "Include", std::move(args));
      }
      default: {
        std::vector<Expr> items;
        int n = uniform(0, 3);
        for (int i = 0; i < n; ++i) items.push_back(expression(depth - 1));
        return make_list(std::move(items));
      }
    }
  }

  classad::ClassAd ad(int attributes, int depth) {
    classad::ClassAd out;
    for (int i = 0; i < attributes; ++i) out.set(name(), expression(depth));
    return out;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace cworm::testing

#endif  // CWORM_TESTS_CLASSAD_GEN_H_
