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

#ifndef DPMERGE_MERGE_LC_H_
#define DPMERGE_MERGE_LC_H_

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "dpmerge/accounting.h"
#include "dpmerge/core.h"
#include "dpmerge/pld.h"
#include "dpmerge/rdp.h"

namespace dpmerge {

// One step of the linearly combined update, seen as a Gaussian mixture.
// Subsets J of the models are bitmasks (bit i set iff model i is sampled).
struct LcStepParams {
  int n_models = 0;
  std::vector<double> subset_prob;   // rho_J = prod_{i in J} q_i prod_{i not in J} (1 - q_i)
  std::vector<double> subset_shift;  // Delta_J = sum_{i in J} lambda_i eta_i C_i
  double noise_scale = 0.0;          // s^2 = sum_i (lambda_i eta_i sigma_i C_i)^2
  std::vector<double> normalized_shift;  // Delta_J / s, zero when privacy-free

  std::size_t num_subsets() const { return subset_prob.size(); }
  // True when no subset with positive probability moves the output.
  bool privacy_free() const;
};

// Throws kCorrelatedInputs for shared-noise inputs, kInvalidArgument for
// unaligned specs, and kDegenerateNoise when some reachable subset has a
// positive shift but the mixed noise scale is zero.
LcStepParams DeriveStepParams(std::span<const MechanismSpec> specs,
                              const MergeWeights& lambda, int step);

// Number of ways to write `order` as an ordered sum of `parts` nonnegative
// integers: C(order + parts - 1, parts - 1). Saturates at UINT64_MAX.
std::uint64_t CompositionCount(int parts, int order);

// Calls `visit` with every composition of `order` into `parts` nonnegative
// counts, in lexicographically descending order of the count vector.
void ForEachComposition(int parts, int order,
                        const std::function<void(std::span<const int>)>& visit);

// Per-step Renyi bound at integer order alpha >= 2:
//   1/(alpha-1) log sum_gamma alpha!/prod gamma_J! * B(gamma) * prod rho_J^gamma_J
//   B(gamma) = exp(((sum gamma_J d_J)^2 - sum gamma_J d_J^2) / 2)
// with d_J the normalized shifts. Throws kEnumerationCapExceeded when alpha
// is above the cap for params.n_models.
double LcStepRdp(const LcStepParams& params, int alpha,
                 const LcOptions& options = {});

struct LcTraceRow {
  int step = 0;
  double alpha = 0.0;
  double eps = 0.0;
};

// Sum of per-step bounds over the aligned horizon. Requires an integer grid.
// Identical step tuples are enumerated once; the sum still runs in step
// order so the cache does not change any bit of the result.
RdpCurve LcRdpCurve(std::span<const MechanismSpec> specs,
                    const MergeWeights& lambda, const OrderGrid& grid,
                    const LcOptions& options = {}, bool memoize = true,
                    std::vector<LcTraceRow>* trace = nullptr);

RdpConversion LcDpEps(std::span<const MechanismSpec> specs,
                      const MergeWeights& lambda, double delta,
                      const OrderGrid& grid = OrderGrid::DefaultInteger(),
                      const LcOptions& options = {});

// Scalar surrogate loss L(u) = log sum_J rho_J exp(d_J u - d_J^2 / 2) with
// u ~ N(0, 1), discretized in both roundings.
PldPair LcStepSurrogatePld(const LcStepParams& params,
                           const PldOptions& options);

// Composition of the per-step surrogates over the aligned horizon.
PldPair LcPld(std::span<const MechanismSpec> specs, const MergeWeights& lambda,
              const PldOptions& options);

double LcPldDelta(std::span<const MechanismSpec> specs,
                  const MergeWeights& lambda, double eps,
                  const PldOptions& options);

// Pads every DP-SGD spec to the longest horizon with virtual steps
// (q = 0, eta = 0, sigma = C = 1).
std::vector<MechanismSpec> AlignVirtualSteps(
    std::span<const MechanismSpec> specs);

// A Gaussian mechanism as a one-step full-batch DP-SGD run with the same
// shift and noise. DP-SGD inputs are returned unchanged.
MechanismSpec ToDpSgd(const MechanismSpec& spec);

// sum_i lambda_i * models[i]. Throws kDimensionMismatch.
std::vector<double> LcCombine(std::span<const std::vector<double>> models,
                              const MergeWeights& lambda);

// Lattice points meeting `target` under the LC accountant. Gaussian inputs
// are converted with ToDpSgd and all inputs are aligned first.
std::vector<FeasibleEntry> LcFeasibleSet(std::span<const MechanismSpec> models,
                                         const DpGuarantee& target,
                                         double resolution,
                                         Accountant accountant,
                                         const AccountingOptions& options = {});

void WriteLcTraceCsv(std::span<const LcTraceRow> rows, std::ostream& os);

}  // namespace dpmerge

#endif  // DPMERGE_MERGE_LC_H_
