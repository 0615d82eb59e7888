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

#ifndef DPMERGE_ORACLE_H_
#define DPMERGE_ORACLE_H_

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dpmerge/merge_lc.h"

namespace dpmerge {

// sum_k weight_k N(mean_k, variance_k) on the real line.
class GaussianMixture1D {
 public:
  struct Component {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
  };

  // Throws kInvalidArgument unless weights are >= 0 and sum to 1 (to 1e-12),
  // variances are > 0 and there is at least one component.
  static GaussianMixture1D Create(std::vector<Component> components);

  std::span<const Component> components() const { return components_; }
  double LogDensity(double x) const;

 private:
  explicit GaussianMixture1D(std::vector<Component> components)
      : components_(std::move(components)) {}
  std::vector<Component> components_;
};

// D_alpha(p || q) = 1/(alpha-1) log int p^alpha q^(1-alpha), by adaptive
// Gauss-Kronrod quadrature of the integrand scaled by its maximum. Returns
// +inf when some component of p has heavier tails than every component of
// q at this order. Throws kQuadratureFailure when the relative error
// estimate exceeds 1e-10.
double RenyiQuadrature(const GaussianMixture1D& p, const GaussianMixture1D& q,
                       double alpha);

// H_eps(p, q) = int (p - e^eps q)_+ by adaptive quadrature.
double HockeyStickQuadrature(const GaussianMixture1D& p,
                             const GaussianMixture1D& q, double eps);

// Tight delta(eps) of the Gaussian mechanism with shift/scale ratio r:
//   Phi(r/2 - eps/r) - e^eps Phi(-r/2 - eps/r), clamped to [0, 1].
double AnalyticGaussianDelta(double ratio, double eps);

// Smallest eps (to 1e-9) with AnalyticGaussianDelta(ratio, eps) <= delta.
double AnalyticGaussianEpsilon(double ratio, double delta);

// One LC step with explicit per-subset shift vectors v_J in R^d:
//   P = sum_J rho_J N(v_J, s^2 I),  Q = N(0, s^2 I).
class ToyLcInstance {
 public:
  // Throws kInvalidArgument unless d <= 4, rho sums to 1 (to 1e-12) and
  // ||v_J|| <= bound_J (to 1e-12 relative).
  static ToyLcInstance Create(std::vector<double> subset_prob,
                              std::vector<std::vector<double>> shifts,
                              std::vector<double> shift_bounds,
                              double noise_scale);

  // v_J = sum_{i in J} w_i g_i with random directions g_i, ||g_i|| <= 1, so
  // ||v_J|| <= Delta_J. `collinear` puts every g_i on one unit vector with
  // unit norm, which attains the bound.
  static ToyLcInstance FromStepParams(const LcStepParams& params, int dimension,
                                      bool collinear, std::mt19937_64& rng);

  int dimension() const { return dimension_; }
  std::span<const double> subset_prob() const { return subset_prob_; }
  const std::vector<std::vector<double>>& shifts() const { return shifts_; }
  std::span<const double> shift_bounds() const { return shift_bounds_; }
  double noise_scale() const { return noise_scale_; }

  // log dP/dQ at y.
  double LogLikelihoodRatio(std::span<const double> y) const;

 private:
  ToyLcInstance() = default;
  int dimension_ = 0;
  std::vector<double> subset_prob_;
  std::vector<std::vector<double>> shifts_;
  std::vector<double> shift_bounds_;
  double noise_scale_ = 1.0;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct HockeyStickEstimate {
  McEstimate up;    // H_eps(P, Q) = E_Q[(e^L - e^eps)_+]
  McEstimate down;  // H_eps(Q, P) = E_Q[(1 - e^(eps + L))_+]
};

// Monte-Carlo hockey-stick divergences of a toy instance. Samples are drawn
// in fixed chunks, each with its own seed derived from (seed, chunk), and
// summed in chunk order.
HockeyStickEstimate HockeyStickMc(const ToyLcInstance& instance, double eps,
                                  std::int64_t n_samples, std::uint64_t seed);

}  // namespace dpmerge

#endif  // DPMERGE_ORACLE_H_
