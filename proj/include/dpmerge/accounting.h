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

#ifndef DPMERGE_ACCOUNTING_H_
#define DPMERGE_ACCOUNTING_H_

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dpmerge/core.h"
#include "dpmerge/pld.h"
#include <nlohmann/json.hpp>

namespace dpmerge {

enum class Accountant { kRdp, kPld };

std::string_view AccountantName(Accountant accountant);

// Limits on the gamma enumeration behind the structured LC Renyi bound. The
// count of terms is C(alpha + 2^N - 1, 2^N - 1), so the cost grows quickly in
// both the order and the number of models.
struct LcOptions {
  int max_models = 3;
  // Largest admissible order per model count; index 0 is unused.
  std::vector<int> max_order_by_models = {0, 64, 64, 16};
  // Replaces the per-N table when set.
  std::optional<int> max_order_override;
  // Terms further than this many nats below the running maximum are folded
  // into a remainder bound instead of being exponentiated.
  double prune_nats = 60.0;

  int MaxOrder(int n_models) const;
};

struct AccountingOptions {
  // Defaults: the mixed grid for all-Gaussian RS inputs, integers 2..64
  // otherwise.
  std::optional<OrderGrid> orders;
  PldOptions pld;
  LcOptions lc;
};

// A merge weight that meets the target, with its certificate. RDP entries
// carry (eps(delta'), delta'); PLD entries carry (eps', delta(eps')).
struct FeasibleEntry {
  MergeWeights weights;
  double eps = 0.0;
  double delta = 0.0;
};

// JSON array of {"weights": [...], "eps": x, "delta": y}.
nlohmann::json FeasibleSetToJson(std::span<const FeasibleEntry> entries);

// The entry maximizing sum_i weights_i * utility_i (first one on ties).
std::optional<FeasibleEntry> SelectMaxUtility(
    std::span<const FeasibleEntry> entries, std::span<const double> utility);

}  // namespace dpmerge

#endif  // DPMERGE_ACCOUNTING_H_
