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

#ifndef DPMERGE_MERGE_RS_H_
#define DPMERGE_MERGE_RS_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dpmerge/accounting.h"
#include "dpmerge/core.h"
#include "dpmerge/pld.h"
#include "dpmerge/rdp.h"

namespace dpmerge {

// Renyi bound for releasing model I ~ Cat(pi):
//   eps_alpha(pi) <= 1/(alpha-1) log sum_i pi_i exp((alpha-1) eps_alpha,i).
// Zero-weight models are dropped before the log-sum-exp.
RdpCurve RsRdpCurve(std::span<const RdpCurve> curves, const MergeWeights& pi);

RdpConversion RsDpEps(std::span<const RdpCurve> curves, const MergeWeights& pi,
                      double delta);

// max{sum_i pi_i H_eps(P_i,Q_i), sum_i pi_i H_eps(Q_i,P_i)}; each direction
// uses the matching rounding of each model's PLD.
double RsPldDelta(std::span<const PldPair> plds, const MergeWeights& pi,
                  double eps);

// Inverse of RsPldDelta in eps by bisection. Throws kUnreachable when the
// weighted infinity atoms already exceed delta.
double RsPldEpsilon(std::span<const PldPair> plds, const MergeWeights& pi,
                    double delta);

// Lattice points of the simplex (lexicographic order) that meet `target`
// under the chosen accountant. Supports N <= 4.
std::vector<FeasibleEntry> RsFeasibleSet(std::span<const MechanismSpec> models,
                                         const DpGuarantee& target,
                                         double resolution,
                                         Accountant accountant,
                                         const AccountingOptions& options = {});

// The order grid RS accounting uses for `models` unless overridden.
OrderGrid RsDefaultGrid(std::span<const MechanismSpec> models);

// Draws model indices with probabilities pi. Uses no data and no global
// state; the sequence is fixed by the seed.
class RsSampler {
 public:
  RsSampler(const MergeWeights& pi, std::uint64_t seed);
  std::size_t Next();

 private:
  std::vector<double> cumulative_;
  std::size_t last_nonzero_;
  std::mt19937_64 rng_;
};

std::size_t RsSample(const MergeWeights& pi, std::uint64_t seed);

}  // namespace dpmerge

#endif  // DPMERGE_MERGE_RS_H_
