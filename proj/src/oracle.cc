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

#include "dpmerge/oracle.h"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace dpmerge {
namespace {

constexpr double kQuadratureRelTol = 1e-10;
constexpr int kMaxPieces = 20000;
constexpr std::int64_t kChunk = std::int64_t{1} << 16;

double LogSumExp(std::span<const double> terms) {
  double max_term = -kInfinity;
  for (double t : terms) max_term = std::max(max_term, t);
  if (max_term == -kInfinity) return -kInfinity;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return max_term + std::log(sum);
}

std::string Scientific(double value) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << value;
  return os.str();
}

double NormalCdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

struct Window {
  double lo = kInfinity;
  double hi = -kInfinity;
  double min_width = kInfinity;

  void Cover(double centre, double scale, double half_widths) {
    lo = std::min(lo, centre - half_widths * scale);
    hi = std::max(hi, centre + half_widths * scale);
    min_width = std::min(min_width, scale);
  }
};

// Adaptive Gauss-Kronrod on [a, b]: bisects until the error estimate is
// below `rel_tol` relative or `abs_per_length` times the piece width.
template <typename Fn>
void IntegratePiece(Fn& fn, double a, double b, int depth, double rel_tol,
                    double abs_per_length, double& total, double& error) {
  double piece_error = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
          fn, a, b, 0, 0.0, &piece_error);
  if (depth == 0 || piece_error <= std::max(rel_tol * std::abs(value),
                                            abs_per_length * (b - a))) {
    total += value;
    error += piece_error;
    return;
  }
  const double mid = 0.5 * (a + b);
  IntegratePiece(fn, a, mid, depth - 1, rel_tol, abs_per_length, total,
                 error);
  IntegratePiece(fn, mid, b, depth - 1, rel_tol, abs_per_length, total,
                 error);
}

// Integrates fn over [lo, hi] split into pieces no wider than `piece`.
// Returns {integral, error estimate}.
template <typename Fn>
std::pair<double, double> Integrate(Fn&& fn, double lo, double hi,
                                    double piece, double rel_tol = 1e-15,
                                    double abs_per_length = 1e-18) {
  const int pieces = std::clamp(
      static_cast<int>(std::ceil((hi - lo) / piece)), 1, kMaxPieces);
  const double width = (hi - lo) / pieces;
  double total = 0.0;
  double error = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double a = lo + k * width;
    const double b = k + 1 == pieces ? hi : a + width;
    IntegratePiece(fn, a, b, 12, rel_tol, abs_per_length, total, error);
  }
  return {total, error};
}

}  // namespace

GaussianMixture1D GaussianMixture1D::Create(std::vector<Component> components) {
  if (components.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "mixture needs a component");
  }
  double total = 0.0;
  for (const Component& c : components) {
    if (!(c.weight >= 0.0) || !(c.variance > 0.0) || !std::isfinite(c.mean)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "mixture weights must be >= 0 and variances > 0");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::kInvalidArgument, "mixture weights must sum to 1");
  }
  return GaussianMixture1D(std::move(components));
}

double GaussianMixture1D::LogDensity(double x) const {
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const Component& c : components_) {
    if (c.weight == 0.0) continue;
    const double z = x - c.mean;
    terms.push_back(std::log(c.weight) - 0.5 * z * z / c.variance -
                    0.5 * std::log(2.0 * std::numbers::pi * c.variance));
  }
  return LogSumExp(terms);
}

double RenyiQuadrature(const GaussianMixture1D& p, const GaussianMixture1D& q,
                       double alpha) {
  if (!(alpha > 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "Renyi order must exceed 1");
  }
  double widest_q = 0.0;
  for (const auto& c : q.components()) {
    if (c.weight > 0.0) widest_q = std::max(widest_q, c.variance);
  }
  Window window;
  for (const auto* mixture : {&p, &q}) {
    for (const auto& c : mixture->components()) {
      if (c.weight > 0.0) window.Cover(c.mean, std::sqrt(c.variance), 12.0);
    }
  }
  // Each (p_j, q_k) pair contributes a Gaussian-shaped bump centred at
  // (alpha m_j / v_j - (alpha-1) m_k / v_k) / a with precision a.
  for (const auto& cp : p.components()) {
    if (cp.weight == 0.0) continue;
    if (alpha / cp.variance - (alpha - 1.0) / widest_q <= 0.0) {
      return kInfinity;
    }
    for (const auto& cq : q.components()) {
      if (cq.weight == 0.0) continue;
      const double precision =
          alpha / cp.variance - (alpha - 1.0) / cq.variance;
      if (precision <= 0.0) continue;
      const double centre = (alpha * cp.mean / cp.variance -
                             (alpha - 1.0) * cq.mean / cq.variance) /
                            precision;
      window.Cover(centre, 1.0 / std::sqrt(precision), 40.0);
    }
  }
  const auto log_integrand = [&](double x) {
    return alpha * p.LogDensity(x) + (1.0 - alpha) * q.LogDensity(x);
  };
  const double piece = window.min_width;
  double peak = -kInfinity;
  double peak_x = window.lo;
  const int scan = std::clamp(
      static_cast<int>(std::ceil((window.hi - window.lo) / piece)) * 8, 1000,
      8 * kMaxPieces);
  for (int k = 0; k <= scan; ++k) {
    const double x = window.lo + (window.hi - window.lo) * k / scan;
    const double value = log_integrand(x);
    if (value > peak) {
      peak = value;
      peak_x = x;
    }
  }
  // The log integrand is a difference of two terms; its rounding error
  // scales with their magnitude and bounds the attainable accuracy.
  const double condition = std::abs(alpha * p.LogDensity(peak_x)) +
                           std::abs((alpha - 1.0) * q.LogDensity(peak_x));
  const double noise = std::numeric_limits<double>::epsilon() * condition;
  const double tolerance = std::max(kQuadratureRelTol, 64.0 * noise);
  const auto [integral, error] = Integrate(
      [&](double x) { return std::exp(log_integrand(x) - peak); }, window.lo,
      window.hi, piece, std::max(1e-15, 8.0 * noise));
  if (!(integral > 0.0) || error > tolerance * integral) {
    throw Error(ErrorKind::kQuadratureFailure,
                "Renyi quadrature error estimate " + Scientific(error) +
                    " exceeds " + Scientific(tolerance * integral));
  }
  return (peak + std::log(integral)) / (alpha - 1.0);
}

double HockeyStickQuadrature(const GaussianMixture1D& p,
                             const GaussianMixture1D& q, double eps) {
  Window window;
  for (const auto* mixture : {&p, &q}) {
    for (const auto& c : mixture->components()) {
      if (c.weight > 0.0) window.Cover(c.mean, std::sqrt(c.variance), 40.0);
    }
  }
  const auto gap = [&](double x) {
    return p.LogDensity(x) - q.LogDensity(x) - eps;
  };
  // The integrand has kinks where the log densities cross; integrating
  // between crossings keeps each Gauss-Kronrod panel smooth.
  std::vector<double> breaks = {window.lo};
  const int scan = std::clamp(
      static_cast<int>(std::ceil((window.hi - window.lo) / window.min_width)) *
          8,
      1000, 8 * kMaxPieces);
  const auto log_peak = [&](double x) {
    return std::max(p.LogDensity(x), q.LogDensity(x) + eps);
  };
  double prev_x = window.lo;
  double prev_gap = gap(prev_x);
  double max_log_density = log_peak(prev_x);
  for (int k = 1; k <= scan; ++k) {
    const double x = window.lo + (window.hi - window.lo) * k / scan;
    const double g = gap(x);
    max_log_density = std::max(max_log_density, log_peak(x));
    if ((g > 0.0) != (prev_gap > 0.0)) {
      double a = prev_x;
      double b = x;
      for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        if ((gap(mid) > 0.0) == (prev_gap > 0.0)) {
          a = mid;
        } else {
          b = mid;
        }
      }
      breaks.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_gap = g;
  }
  breaks.push_back(window.hi);
  // Near a crossing the integrand cancels to rounding noise of order
  // eps_machine times the larger density; that noise bounds attainable error.
  const double noise_per_length = 16.0 *
                                  std::numeric_limits<double>::epsilon() *
                                  std::exp(max_log_density);
  double integral = 0.0;
  double error = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double mid = 0.5 * (breaks[k] + breaks[k + 1]);
    if (!(gap(mid) > 0.0)) continue;
    const auto [part, part_error] = Integrate(
        [&](double x) {
          const double lp = p.LogDensity(x);
          const double lq = q.LogDensity(x) + eps;
          return lp > lq ? std::exp(lp) - std::exp(lq) : 0.0;
        },
        breaks[k], breaks[k + 1], window.min_width, 1e-15, noise_per_length);
    integral += part;
    error += part_error;
  }
  if (error > 1e-12) {
    throw Error(ErrorKind::kQuadratureFailure,
                "hockey-stick quadrature error estimate " +
                    Scientific(error) + " exceeds 1e-12");
  }
  return std::clamp(integral, 0.0, 1.0);
}

double AnalyticGaussianDelta(double ratio, double eps) {
  if (!(ratio > 0.0)) return 0.0;
  const double a = NormalCdf(0.5 * ratio - eps / ratio);
  const double b = NormalCdf(-0.5 * ratio - eps / ratio);
  const double scaled = b > 0.0 ? std::exp(eps + std::log(b)) : 0.0;
  return std::clamp(a - scaled, 0.0, 1.0);
}

double AnalyticGaussianEpsilon(double ratio, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta must lie in (0, 1)");
  }
  if (AnalyticGaussianDelta(ratio, 0.0) <= delta) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (AnalyticGaussianDelta(ratio, hi) > delta) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (AnalyticGaussianDelta(ratio, mid) > delta ? lo : hi) = mid;
  }
  return hi;
}

ToyLcInstance ToyLcInstance::Create(std::vector<double> subset_prob,
                                    std::vector<std::vector<double>> shifts,
                                    std::vector<double> shift_bounds,
                                    double noise_scale) {
  if (subset_prob.empty() || subset_prob.size() != shifts.size() ||
      subset_prob.size() != shift_bounds.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "toy instance needs one shift and bound per subset");
  }
  if (!(noise_scale > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "noise scale must be > 0");
  }
  const std::size_t dim = shifts.front().size();
  if (dim == 0 || dim > 4) {
    throw Error(ErrorKind::kInvalidArgument,
                "toy dimension must lie in 1..4, got " + std::to_string(dim));
  }
  double total = 0.0;
  for (std::size_t j = 0; j < subset_prob.size(); ++j) {
    if (!(subset_prob[j] >= 0.0) || shifts[j].size() != dim) {
      throw Error(ErrorKind::kInvalidArgument,
                  "toy subsets need probabilities >= 0 and equal dimensions");
    }
    total += subset_prob[j];
    double norm_sq = 0.0;
    for (double v : shifts[j]) norm_sq += v * v;
    if (std::sqrt(norm_sq) > shift_bounds[j] * (1.0 + 1e-12) + 1e-300) {
      throw Error(ErrorKind::kInvalidArgument,
                  "subset shift " + std::to_string(j) + " exceeds its bound");
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::kInvalidArgument,
                "toy subset probabilities must sum to 1");
  }
  ToyLcInstance out;
  out.dimension_ = static_cast<int>(dim);
  out.subset_prob_ = std::move(subset_prob);
  out.shifts_ = std::move(shifts);
  out.shift_bounds_ = std::move(shift_bounds);
  out.noise_scale_ = noise_scale;
  return out;
}

ToyLcInstance ToyLcInstance::FromStepParams(const LcStepParams& params,
                                            int dimension, bool collinear,
                                            std::mt19937_64& rng) {
  const auto dim = static_cast<std::size_t>(dimension);
  const auto n = static_cast<std::size_t>(params.n_models);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> length(0.5, 1.0);
  std::vector<std::vector<double>> directions(n, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (collinear) {
      directions[i][0] = 1.0;
      continue;
    }
    double norm_sq = 0.0;
    for (double& v : directions[i]) {
      v = normal(rng);
      norm_sq += v * v;
    }
    const double scale = length(rng) / std::sqrt(norm_sq);
    for (double& v : directions[i]) v *= scale;
  }
  std::vector<std::vector<double>> shifts(params.num_subsets(),
                                          std::vector<double>(dim, 0.0));
  for (std::size_t mask = 0; mask < params.num_subsets(); ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!((mask >> i) & 1U)) continue;
      const double w = params.subset_shift[std::size_t{1} << i];
      for (std::size_t k = 0; k < dim; ++k) {
        shifts[mask][k] += w * directions[i][k];
      }
    }
  }
  return Create(params.subset_prob, std::move(shifts), params.subset_shift,
                params.noise_scale);
}

double ToyLcInstance::LogLikelihoodRatio(std::span<const double> y) const {
  const double inv_var = 1.0 / (noise_scale_ * noise_scale_);
  std::vector<double> terms;
  terms.reserve(subset_prob_.size());
  for (std::size_t j = 0; j < subset_prob_.size(); ++j) {
    if (subset_prob_[j] == 0.0) continue;
    double dot = 0.0;
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      dot += shifts_[j][k] * y[k];
      norm_sq += shifts_[j][k] * shifts_[j][k];
    }
    terms.push_back(std::log(subset_prob_[j]) +
                    (dot - 0.5 * norm_sq) * inv_var);
  }
  return LogSumExp(terms);
}

HockeyStickEstimate HockeyStickMc(const ToyLcInstance& instance, double eps,
                                  std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 2) {
    throw Error(ErrorKind::kInvalidArgument, "need at least two samples");
  }
  const double e_eps = std::exp(eps);
  double up_sum = 0.0;
  double up_sq = 0.0;
  double down_sum = 0.0;
  double down_sq = 0.0;
  std::vector<double> y(static_cast<std::size_t>(instance.dimension()));
  for (std::int64_t start = 0, chunk = 0; start < n_samples;
       start += kChunk, ++chunk) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chunk)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, instance.noise_scale());
    const std::int64_t count = std::min(kChunk, n_samples - start);
    double cu = 0.0, cu2 = 0.0, cd = 0.0, cd2 = 0.0;
    for (std::int64_t s = 0; s < count; ++s) {
      for (double& v : y) v = noise(rng);
      const double loss = instance.LogLikelihoodRatio(y);
      const double up = std::max(0.0, std::exp(loss) - e_eps);
      const double down = std::max(0.0, 1.0 - std::exp(eps + loss));
      cu += up;
      cu2 += up * up;
      cd += down;
      cd2 += down * down;
    }
    up_sum += cu;
    up_sq += cu2;
    down_sum += cd;
    down_sq += cd2;
  }
  const auto n = static_cast<double>(n_samples);
  const auto estimate = [n](double sum, double sq) {
    const double mean = sum / n;
    const double var = std::max(0.0, (sq / n - mean * mean) * n / (n - 1.0));
    return McEstimate{mean, std::sqrt(var / n)};
  };
  return {estimate(up_sum, up_sq), estimate(down_sum, down_sq)};
}

}  // namespace dpmerge
