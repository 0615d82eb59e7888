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

#include "dpmerge/merge_rs.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace dpmerge {
namespace {

void CheckSizes(std::size_t n_inputs, const MergeWeights& pi) {
  if (n_inputs != pi.size() || n_inputs == 0) {
    throw Error(ErrorKind::kDimensionMismatch,
                "got " + std::to_string(n_inputs) + " models for " +
                    std::to_string(pi.size()) + " weights");
  }
}

// Index of the only nonzero weight, or pi.size() if there are several.
std::size_t SoleSupport(const MergeWeights& pi) {
  std::size_t found = pi.size();
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] > 0.0) {
      if (found != pi.size()) return pi.size();
      found = i;
    }
  }
  return found;
}

}  // namespace

OrderGrid RsDefaultGrid(std::span<const MechanismSpec> models) {
  const bool all_gaussian =
      std::all_of(models.begin(), models.end(),
                  [](const MechanismSpec& m) { return m.is_gaussian(); });
  return all_gaussian ? OrderGrid::DefaultMixed() : OrderGrid::DefaultInteger();
}

RdpCurve RsRdpCurve(std::span<const RdpCurve> curves, const MergeWeights& pi) {
  CheckSizes(curves.size(), pi);
  const OrderGrid& grid = curves.front().grid();
  for (const RdpCurve& curve : curves) {
    if (!(curve.grid() == grid)) {
      throw Error(ErrorKind::kGridMismatch,
                  "RS mixture needs curves on a common order grid");
    }
  }
  const std::size_t sole = SoleSupport(pi);
  if (sole < pi.size()) return curves[sole];

  std::vector<double> values(grid.size());
  for (std::size_t a = 0; a < grid.size(); ++a) {
    const double scale = grid[a] - 1.0;
    double max_term = -kInfinity;
    bool infinite = false;
    for (std::size_t i = 0; i < pi.size(); ++i) {
      if (pi[i] == 0.0) continue;
      if (std::isinf(curves[i][a])) {
        infinite = true;
        break;
      }
      max_term = std::max(max_term, std::log(pi[i]) + scale * curves[i][a]);
    }
    if (infinite) {
      values[a] = kInfinity;
      continue;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
      if (pi[i] == 0.0) continue;
      sum += std::exp(std::log(pi[i]) + scale * curves[i][a] - max_term);
    }
    values[a] = std::max(0.0, (max_term + std::log(sum)) / scale);
  }
  return RdpCurve(grid, std::move(values));
}

RdpConversion RsDpEps(std::span<const RdpCurve> curves, const MergeWeights& pi,
                      double delta) {
  return RdpToDp(RsRdpCurve(curves, pi), delta);
}

double RsPldDelta(std::span<const PldPair> plds, const MergeWeights& pi,
                  double eps) {
  CheckSizes(plds.size(), pi);
  double up = 0.0;
  double down = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] == 0.0) continue;
    up += pi[i] * plds[i].up.HockeyStickUp(eps);
    down += pi[i] * plds[i].down.HockeyStickDown(eps);
  }
  return std::clamp(std::max(up, down), 0.0, 1.0);
}

double RsPldEpsilon(std::span<const PldPair> plds, const MergeWeights& pi,
                    double delta) {
  CheckSizes(plds.size(), pi);
  double pos_atom = 0.0;
  double neg_atom = 0.0;
  double eps_max = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (pi[i] == 0.0) continue;
    pos_atom += pi[i] * plds[i].up.pos_inf();
    neg_atom += pi[i] * plds[i].down.neg_inf();
    const DiscretePld& up = plds[i].up;
    if (up.size() > 0) eps_max = std::max(eps_max, up.loss(up.size() - 1));
    eps_max = std::max(eps_max, -plds[i].down.origin());
  }
  if (std::max(pos_atom, neg_atom) > delta) {
    throw Error(ErrorKind::kUnreachable,
                "infinity atoms exceed the target delta");
  }
  return InvertDelta([&](double eps) { return RsPldDelta(plds, pi, eps); },
                     delta, eps_max);
}

std::vector<FeasibleEntry> RsFeasibleSet(std::span<const MechanismSpec> models,
                                         const DpGuarantee& target,
                                         double resolution,
                                         Accountant accountant,
                                         const AccountingOptions& options) {
  if (models.empty() || models.size() > 4) {
    throw Error(ErrorKind::kInvalidArgument,
                "RS feasibility supports 1 to 4 models, got " +
                    std::to_string(models.size()));
  }
  const std::vector<MergeWeights> lattice =
      SimplexLattice(models.size(), resolution);
  std::vector<FeasibleEntry> feasible;
  if (accountant == Accountant::kRdp) {
    if (!(target.delta > 0.0 && target.delta < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "RDP feasibility needs target delta in (0, 1)");
    }
    const OrderGrid grid = options.orders.value_or(RsDefaultGrid(models));
    std::vector<RdpCurve> curves;
    for (const MechanismSpec& model : models) {
      curves.push_back(MechanismRdpCurve(model, grid));
    }
    for (const MergeWeights& pi : lattice) {
      double eps = kInfinity;
      try {
        eps = RsDpEps(curves, pi, target.delta).eps;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kAllInfinite) throw;
      }
      if (eps <= target.eps) feasible.push_back({pi, eps, target.delta});
    }
  } else {
    std::vector<PldPair> plds;
    for (const MechanismSpec& model : models) {
      plds.push_back(MechanismPld(model, options.pld));
    }
    for (const MergeWeights& pi : lattice) {
      const double delta = RsPldDelta(plds, pi, target.eps);
      if (delta <= target.delta) feasible.push_back({pi, target.eps, delta});
    }
  }
  return feasible;
}

RsSampler::RsSampler(const MergeWeights& pi, std::uint64_t seed)
    : cumulative_(pi.size()), last_nonzero_(0), rng_(seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    total += pi[i];
    cumulative_[i] = total;
    if (pi[i] > 0.0) last_nonzero_ = i;
  }
}

std::size_t RsSampler::Next() {
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  for (std::size_t i = 0; i < last_nonzero_; ++i) {
    if (u < cumulative_[i]) return i;
  }
  return last_nonzero_;
}

std::size_t RsSample(const MergeWeights& pi, std::uint64_t seed) {
  RsSampler sampler(pi, seed);
  return sampler.Next();
}

}  // namespace dpmerge
