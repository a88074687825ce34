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

#include "cworm/selector.h"

#include "json.hpp"

namespace cworm {

SelectionResponse select(const SelectionRequest& request, const Directory& directory, SimTime now) {
  if (!request.request_ad.contains(classad::kRequirementsAttr))
    return {SelectionFailure{"request ad has no requirements attribute"}};

  std::optional<SelectionSuccess> best;
  // live() is name-ordered, so keeping the first of equal ranks breaks ties
  // toward the smallest name.
  for (const Clique* clique : directory.live(now)) {
    if (request.excluded.count(clique->name)) continue;
    classad::ClassAd ad = derive_clique_ad(*clique, now);
    if (!classad::check_requirements(request.request_ad, ad)) continue;
    double rank = classad::compute_rank(request.request_ad, ad);
    if (request.min_rank && !(rank > *request.min_rank)) continue;
    if (!best || rank > best->rank) best = SelectionSuccess{clique->name, std::move(ad), rank};
  }
  if (!best) return {SelectionFailure{kNoMatchReason}};
  return {std::move(*best)};
}

SelectionResponse select_text(std::string_view ad_text, std::string request_id,
                              const Directory& directory, SimTime now) {
  SelectionRequest request;
  try {
    request.request_ad = classad::parse_ad(ad_text);
  } catch (const classad::ParseError& e) {
    return {SelectionFailure{std::string("malformed request: ") + e.what()}};
  }
  request.request_id = std::move(request_id);
  return select(request, directory, now);
}

SelectionRequest exclude_current(SelectionRequest request, const std::string& current_clique,
                                 const Directory& directory, SimTime now) {
  request.excluded.insert(current_clique);
  if (const Clique* current = directory.find(current_clique, now)) {
    classad::ClassAd ad = derive_clique_ad(*current, now);
    double rank = classad::compute_rank(request.request_ad, ad);
    request.min_rank = request.min_rank ? std::max(*request.min_rank, rank) : rank;
  }
  return request;
}

std::string format_response(const SelectionResponse& response) {
  nlohmann::ordered_json j;
  if (response.ok()) {
    j["status"] = "success";
    j["clique"] = response.success().clique_name;
    j["rank"] = response.success().rank;
  } else {
    j["status"] = "failure";
    j["reason"] = response.failure().reason;
  }
  return j.dump();
}

}  // namespace cworm
