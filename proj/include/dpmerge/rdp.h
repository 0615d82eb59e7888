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

#ifndef DPMERGE_RDP_H_
#define DPMERGE_RDP_H_

#include <span>
#include <vector>

#include "dpmerge/core.h"

namespace dpmerge {

// Renyi privacy curve: one epsilon per order of `grid` (possibly +inf).
class RdpCurve {
 public:
  RdpCurve(OrderGrid grid, std::vector<double> values);

  static RdpCurve Zero(const OrderGrid& grid);
  static RdpCurve AllInfinite(const OrderGrid& grid);

  const OrderGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

 private:
  OrderGrid grid_;
  std::vector<double> values_;
};

// Gaussian mechanism: eps_alpha = alpha * sensitivity^2 / (2 sigma^2).
RdpCurve GaussianRdpCurve(const GaussianSpec& spec, const OrderGrid& grid);

// Poisson-subsampled Gaussian with rate q and noise multiplier sigma under
// add/remove adjacency, integer order alpha >= 2:
//   1/(alpha-1) log sum_k C(alpha,k) (1-q)^(alpha-k) q^k exp(k(k-1)/(2 sigma^2))
double SubsampledGaussianRdp(double q, double sigma, int alpha);

// Requires an integer-only grid.
RdpCurve SubsampledGaussianRdpCurve(double q, double sigma,
                                    const OrderGrid& grid);

// Composition of the per-step subsampled-Gaussian curves of one DP-SGD run.
// Requires an integer-only grid.
RdpCurve DpSgdRdpCurve(const DpSgdSpec& spec, const OrderGrid& grid);

// Dispatches on the mechanism kind. DP-SGD mechanisms need an integer grid.
RdpCurve MechanismRdpCurve(const MechanismSpec& spec, const OrderGrid& grid);

// Pointwise sum; +inf absorbs. Throws kGridMismatch on differing grids and
// kInvalidArgument on an empty list.
RdpCurve ComposeRdp(std::span<const RdpCurve> curves);

struct RdpConversion {
  double eps = 0.0;
  double alpha = 0.0;  // minimizing order
};

// eps = min over the grid of eps_alpha + log(1/delta)/(alpha-1). Throws
// kAllInfinite when no order is finite and kInvalidArgument unless
// 0 < delta < 1.
RdpConversion RdpToDp(const RdpCurve& curve, double delta);

}  // namespace dpmerge

#endif  // DPMERGE_RDP_H_
