// Copyright 2026 The dpmerge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpmerge/accounting.h"

#include <cstddef>
#include <string>

namespace dpmerge {

std::string_view AccountantName(Accountant accountant) {
  return accountant == Accountant::kRdp ? "rdp" : "pld";
}

int LcOptions::MaxOrder(int n_models) const {
  if (max_order_override.has_value()) return *max_order_override;
  if (n_models <= 0 ||
      static_cast<std::size_t>(n_models) >= max_order_by_models.size()) {
    return 0;
  }
  return max_order_by_models[static_cast<std::size_t>(n_models)];
}

nlohmann::json FeasibleSetToJson(std::span<const FeasibleEntry> entries) {
  nlohmann::json out = nlohmann::json::array();
  for (const FeasibleEntry& entry : entries) {
    nlohmann::json weights = nlohmann::json::array();
    for (double w : entry.weights.values()) weights.push_back(w);
    out.push_back({{"weights", weights},
                   {"eps", entry.eps},
                   {"delta", entry.delta}});
  }
  return out;
}

std::optional<FeasibleEntry> SelectMaxUtility(
    std::span<const FeasibleEntry> entries, std::span<const double> utility) {
  std::optional<FeasibleEntry> best;
  double best_value = 0.0;
  for (const FeasibleEntry& entry : entries) {
    if (entry.weights.size() != utility.size()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "utility vector has " + std::to_string(utility.size()) +
                      " entries, weights have " +
                      std::to_string(entry.weights.size()));
    }
    double value = 0.0;
    for (std::size_t i = 0; i < utility.size(); ++i) {
      value += entry.weights[i] * utility[i];
    }
    if (!best.has_value() || value > best_value) {
      best = entry;
      best_value = value;
    }
  }
  return best;
}

}  // namespace dpmerge
