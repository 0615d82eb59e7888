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

#ifndef DPMERGE_PLD_H_
#define DPMERGE_PLD_H_

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "dpmerge/core.h"

namespace dpmerge {

enum class Rounding { kCeil, kFloor };

// Discretized privacy-loss distribution. Cell j carries the probability,
// under the reference distribution Q, of losses that were rounded onto
// (offset + j) * spacing.
//
// pos_inf is the mass of the truncated upper tail measured under P (that is
// E_Q[e^L ; tail]), which bounds the tail's contribution to H_eps(P, Q) for
// every eps. neg_inf is the Q-mass of the truncated lower tail and bounds its
// contribution to H_eps(Q, P).
class DiscretePld {
 public:
  DiscretePld(std::int64_t offset, double spacing, std::vector<double> masses,
              double pos_inf, double neg_inf, Rounding rounding);

  // All mass at loss zero (identical distributions).
  static DiscretePld PointMass(double spacing, Rounding rounding);

  std::int64_t offset() const { return offset_; }
  double spacing() const { return spacing_; }
  double origin() const { return static_cast<double>(offset_) * spacing_; }
  double loss(std::size_t j) const {
    return static_cast<double>(offset_ + static_cast<std::int64_t>(j)) *
           spacing_;
  }
  std::span<const double> masses() const { return masses_; }
  std::size_t size() const { return masses_.size(); }
  double pos_inf() const { return pos_inf_; }
  double neg_inf() const { return neg_inf_; }
  Rounding rounding() const { return rounding_; }

  // Cells plus both atoms.
  double total_mass() const;

  // sum_j m_j (e^{l_j} - e^eps)_+ + pos_inf.
  double HockeyStickUp(double eps) const;
  // sum_j m_j (1 - e^{eps + l_j})_+ + neg_inf.
  double HockeyStickDown(double eps) const;

 private:
  std::int64_t offset_;
  double spacing_;
  std::vector<double> masses_;
  double pos_inf_;
  double neg_inf_;
  Rounding rounding_;
};

// Losses rounded up (for H(P,Q)) and down (for H(Q,P)) on a shared window.
struct PldPair {
  DiscretePld up;
  DiscretePld down;

  static PldPair PointMass(double spacing);
  double spacing() const { return up.spacing(); }
};

struct PldOptions {
  double spacing = 1e-4;
  // Mass allowed in each truncated tail.
  double tail_mass = 1e-12;
  // Upper bound on the number of cells of any intermediate distribution.
  std::size_t max_cells = std::size_t{1} << 22;
};

// Privacy loss of the Gaussian location mixture sum_j probs[j] N(shifts[j], 1)
// against N(0, 1), with u ~ N(0, 1):
//   L(u) = log sum_j probs[j] exp(shifts[j] u - shifts[j]^2 / 2).
// Shifts are in units of the noise scale and must be >= 0. L is increasing in
// u, so cell masses are exact normal interval probabilities.
PldPair MixturePld(std::span<const double> probs,
                   std::span<const double> shifts, const PldOptions& options);

// P = N(sensitivity, sigma^2) against Q = N(0, sigma^2). A zero sensitivity
// gives the point mass at zero.
PldPair GaussianPld(const GaussianSpec& spec, const PldOptions& options);

// (1-q) N(0, s^2) + q N(shift, s^2) against N(0, s^2).
PldPair SubsampledGaussianStepPld(double q, double shift, double scale,
                                  const PldOptions& options);

// max{H_eps(P,Q) from the ceil copy, H_eps(Q,P) from the floor copy},
// clamped to [0, 1].
double PldDelta(const PldPair& pld, double eps);

// Smallest eps (to 1e-6, rounded up) with PldDelta(pld, eps) <= delta.
// Throws kUnreachable if an infinity atom exceeds delta.
double PldEpsilon(const PldPair& pld, double delta);

// Inverts a nonincreasing delta(eps) by bisection on [0, eps_max]; returns the
// upper end of the final bracket. Shared by the mixture accountants.
template <typename DeltaFn>
double InvertDelta(DeltaFn&& delta_of_eps, double delta, double eps_max);

// Convolution of the loss distributions (composition). Atoms combine as
// 1 - (1-a)(1-b). Throws kSpacingMismatch or kCellCapExceeded.
PldPair Convolve(const PldPair& a, const PldPair& b,
                 const PldOptions& options = {});

// t-fold composition by repeated squaring; t >= 1.
PldPair SelfConvolve(const PldPair& a, int t, const PldOptions& options = {});

// Composed PLD of one DP-SGD run (identical steps are built once and
// self-convolved). Virtual steps contribute the identity.
PldPair DpSgdPld(const DpSgdSpec& spec, const PldOptions& options);

PldPair MechanismPld(const MechanismSpec& spec, const PldOptions& options);

// CSV with '#' header rows for spacing, rounding and atoms, then loss,mass.
void WritePldCsv(const DiscretePld& pld, std::ostream& os);

template <typename DeltaFn>
double InvertDelta(DeltaFn&& delta_of_eps, double delta, double eps_max) {
  constexpr double kTolerance = 1e-6;
  if (delta_of_eps(0.0) <= delta) return 0.0;
  double lo = 0.0;
  double hi = eps_max;
  while (delta_of_eps(hi) > delta) {
    lo = hi;
    hi = 2.0 * hi + 1.0;
    if (hi > 1e6) {
      throw Error(ErrorKind::kUnreachable,
                  "no finite eps attains the target delta");
    }
  }
  while (hi - lo > kTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (delta_of_eps(mid) <= delta) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace dpmerge

#endif  // DPMERGE_PLD_H_
