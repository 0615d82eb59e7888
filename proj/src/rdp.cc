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

#include "dpmerge/rdp.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace dpmerge {
namespace {

void RequireIntegerGrid(const OrderGrid& grid) {
  if (!grid.integer_only()) {
    throw Error(ErrorKind::kInvalidArgument,
                "subsampled Gaussian RDP needs an integer order grid");
  }
}

}  // namespace

RdpCurve::RdpCurve(OrderGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw Error(ErrorKind::kGridMismatch, "curve length differs from grid");
  }
  for (double v : values_) {
    if (!(v >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "RDP values must be >= 0");
    }
  }
}

RdpCurve RdpCurve::Zero(const OrderGrid& grid) {
  return RdpCurve(grid, std::vector<double>(grid.size(), 0.0));
}

RdpCurve RdpCurve::AllInfinite(const OrderGrid& grid) {
  return RdpCurve(grid, std::vector<double>(grid.size(), kInfinity));
}

RdpCurve GaussianRdpCurve(const GaussianSpec& spec, const OrderGrid& grid) {
  const double ratio_sq =
      spec.sensitivity * spec.sensitivity / (spec.sigma * spec.sigma);
  std::vector<double> values;
  values.reserve(grid.size());
  for (double alpha : grid.orders()) values.push_back(alpha * ratio_sq / 2.0);
  return RdpCurve(grid, std::move(values));
}

double SubsampledGaussianRdp(double q, double sigma, int alpha) {
  if (alpha < 2) {
    throw Error(ErrorKind::kInvalidArgument, "order must be an integer >= 2");
  }
  if (!(q >= 0.0 && q <= 1.0) || !(sigma > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "need q in [0,1] and sigma > 0");
  }
  if (q == 0.0) return 0.0;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double lgamma_alpha = std::lgamma(alpha + 1.0);
  // Log-space terms, k = 0..alpha; zero-probability terms are skipped.
  std::vector<double> terms;
  terms.reserve(alpha + 1);
  for (int k = 0; k <= alpha; ++k) {
    if (k < alpha && q == 1.0) continue;
    double t = lgamma_alpha - std::lgamma(k + 1.0) -
               std::lgamma(alpha - k + 1.0) +
               static_cast<double>(k) * (k - 1) / (2.0 * sigma * sigma);
    if (k > 0) t += k * log_q;
    if (k < alpha) t += (alpha - k) * log_1mq;
    terms.push_back(t);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return std::max(0.0, (top + std::log(sum)) / (alpha - 1));
}

RdpCurve SubsampledGaussianRdpCurve(double q, double sigma,
                                    const OrderGrid& grid) {
  RequireIntegerGrid(grid);
  std::vector<double> values;
  values.reserve(grid.size());
  for (double alpha : grid.orders()) {
    values.push_back(SubsampledGaussianRdp(q, sigma, static_cast<int>(alpha)));
  }
  return RdpCurve(grid, std::move(values));
}

RdpCurve DpSgdRdpCurve(const DpSgdSpec& spec, const OrderGrid& grid) {
  RequireIntegerGrid(grid);
  // The per-step cost depends only on (q, sigma); runs are usually constant.
  std::map<std::pair<double, double>, std::vector<double>> cache;
  std::vector<double> total(grid.size(), 0.0);
  for (const DpSgdStep& step : spec.steps) {
    const auto key = std::make_pair(step.sampling_rate, step.noise_multiplier);
    auto it = cache.find(key);
    if (it == cache.end()) {
      const RdpCurve c = SubsampledGaussianRdpCurve(step.sampling_rate,
                                                    step.noise_multiplier, grid);
      it = cache.emplace(key, std::vector<double>(c.values().begin(),
                                                  c.values().end()))
               .first;
    }
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += it->second[i];
  }
  return RdpCurve(grid, std::move(total));
}

RdpCurve MechanismRdpCurve(const MechanismSpec& spec, const OrderGrid& grid) {
  if (spec.is_gaussian()) return GaussianRdpCurve(spec.gaussian(), grid);
  return DpSgdRdpCurve(spec.dpsgd(), grid);
}

RdpCurve ComposeRdp(std::span<const RdpCurve> curves) {
  if (curves.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "nothing to compose");
  }
  const OrderGrid& grid = curves.front().grid();
  std::vector<double> total(grid.size(), 0.0);
  for (const RdpCurve& c : curves) {
    if (!(c.grid() == grid)) {
      throw Error(ErrorKind::kGridMismatch, "curves use different order grids");
    }
    for (std::size_t i = 0; i < total.size(); ++i) {
      total[i] = AddPrivacy(total[i], c[i]);
    }
  }
  return RdpCurve(grid, std::move(total));
}

RdpConversion RdpToDp(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta must lie in (0, 1)");
  }
  const double log_inv_delta = -std::log(delta);
  RdpConversion best{kInfinity, 0.0};
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double alpha = curve.grid()[i];
    const double eps = curve[i] + log_inv_delta / (alpha - 1.0);
    if (eps < best.eps) best = {eps, alpha};
  }
  if (!std::isfinite(best.eps)) {
    throw Error(ErrorKind::kAllInfinite, "every order is non-private");
  }
  return best;
}

}  // namespace dpmerge
