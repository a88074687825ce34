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

// Resource selector: synchronous matching of a request ad against every
// live clique ad, answering with the best clique by rank.

#ifndef CWORM_SELECTOR_H_
#define CWORM_SELECTOR_H_

#include <optional>
#include <set>
#include <string>
#include <variant>

#include "cworm/classad.h"
#include "cworm/resources.h"

namespace cworm {

struct SelectionRequest {
  classad::ClassAd request_ad;
  std::string request_id;
  // Cliques that may not be selected.
  std::set<std::string> excluded;
  // When set, a candidate's rank must strictly exceed this value.
  std::optional<double> min_rank;
};

struct SelectionSuccess {
  std::string clique_name;
  classad::ClassAd clique_ad;
  double rank = 0.0;
};

struct SelectionFailure {
  std::string reason;
};

struct SelectionResponse {
  std::variant<SelectionSuccess, SelectionFailure> outcome;

  bool ok() const { return std::holds_alternative<SelectionSuccess>(outcome); }
  const SelectionSuccess& success() const { return std::get<SelectionSuccess>(outcome); }
  const SelectionFailure& failure() const { return std::get<SelectionFailure>(outcome); }
};

inline constexpr const char* kNoMatchReason = "no matching resources";

// Best live clique by rank; ties go to the lexicographically smallest name.
SelectionResponse select(const SelectionRequest& request, const Directory& directory, SimTime now);

// Parses `ad_text` first; parse problems come back as a Failure carrying the
// diagnostic.
SelectionResponse select_text(std::string_view ad_text, std::string request_id,
                              const Directory& directory, SimTime now);

// Rules out `current_clique` and, if it is live, requires candidates to beat
// its rank as evaluated against its present (possibly degraded) state.
SelectionRequest exclude_current(SelectionRequest request, const std::string& current_clique,
                                 const Directory& directory, SimTime now);

// Wire format: a single-line JSON object {status, clique, rank, reason}.
std::string format_response(const SelectionResponse& response);

}  // namespace cworm

#endif  // CWORM_SELECTOR_H_
