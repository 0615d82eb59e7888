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

#ifndef DPMERGE_BASELINES_H_
#define DPMERGE_BASELINES_H_

#include <optional>
#include <span>

#include "dpmerge/pld.h"
#include "dpmerge/rdp.h"
#include <nlohmann/json.hpp>

namespace dpmerge {

// Releasing all N models at once: pointwise sum of the Renyi curves.
// Throws kGridMismatch.
RdpCurve JointRdpBound(std::span<const RdpCurve> curves);

// Releasing all N models at once: convolution of their PLDs.
// Throws kSpacingMismatch.
PldPair JointPldBound(std::span<const PldPair> plds,
                      const PldOptions& options = {});

// Advanced composition of N (eps, delta) releases against the Renyi route for
// N Gaussian releases with shift-to-noise ratio t.
struct CompositionReport {
  int n = 0;
  double eps = 0.0;     // per-release eps
  double delta = 0.0;   // per-release delta
  double delta0 = 0.0;  // composition slack
  std::optional<double> ratio;  // t = sensitivity / sigma
  double eps_com = 0.0;
  double delta_prime = 0.0;  // n * delta + delta0
  std::optional<double> eps_rdp;
  std::optional<bool> holds;  // eps_rdp <= eps_com
};

// eps_com = eps sqrt(2 n log(1/delta0)) + n eps (e^eps - 1),
// delta' = n delta + delta0. Throws kDeltaTooLarge if delta >= 1/2 and
// kInvalidArgument for other out-of-range inputs.
CompositionReport AdvancedComposition(double eps, double delta, int n,
                                      double delta0);

// (eps, delta)-DP of one Gaussian release with ratio t via the tail bound:
// t^2/2 + t sqrt(2 log(1/delta)).
double GaussianEpsClosedForm(double ratio, double delta);

// Both sides of the comparison for n Gaussian releases with ratio t:
//   eps_rdp = n t^2/2 + t sqrt(2 n log(1/delta')), eps_com as above with
//   eps = GaussianEpsClosedForm(t, delta).
// log(1/delta') is taken as zero once delta' >= 1.
CompositionReport CompareGaussianComposition(double ratio, double delta, int n,
                                             double delta0);

nlohmann::json CompositionReportToJson(const CompositionReport& report);

}  // namespace dpmerge

#endif  // DPMERGE_BASELINES_H_
