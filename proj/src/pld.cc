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

#include "dpmerge/pld.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>

#include "boost/math/special_functions/erf.hpp"

namespace dpmerge {
namespace {

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double NormalSf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// P(a < U <= b) for U ~ N(0, 1), evaluated on the tail that avoids
// cancellation.
double NormalInterval(double a, double b) {
  if (!(b > a)) return 0.0;
  if (a >= 0.0) return std::max(0.0, NormalSf(a) - NormalSf(b));
  return std::max(0.0, NormalCdf(b) - NormalCdf(a));
}

double NormalQuantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

void CheckOptions(const PldOptions& options) {
  if (!(options.spacing > 0.0) || !std::isfinite(options.spacing)) {
    throw Error(ErrorKind::kInvalidArgument, "PLD spacing must be > 0");
  }
  if (!(options.tail_mass > 0.0 && options.tail_mass <= 1e-6)) {
    throw Error(ErrorKind::kInvalidArgument,
                "PLD tail mass must lie in (0, 1e-6]");
  }
}

void CheckCells(std::size_t cells, const PldOptions& options) {
  if (cells > options.max_cells) {
    std::ostringstream os;
    os << "PLD needs " << cells << " cells, cap is " << options.max_cells;
    throw Error(ErrorKind::kCellCapExceeded, os.str());
  }
}

// L(u) = log sum_j p_j exp(d_j u - d_j^2 / 2), increasing in u.
class MixtureLoss {
 public:
  MixtureLoss(std::vector<double> log_probs, std::vector<double> shifts)
      : log_probs_(std::move(log_probs)), shifts_(std::move(shifts)) {
    inf_loss_ = -kInfinity;
    for (std::size_t j = 0; j < shifts_.size(); ++j) {
      if (shifts_[j] == 0.0) inf_loss_ = log_probs_[j];
    }
    max_shift_ = *std::max_element(shifts_.begin(), shifts_.end());
  }

  double inf_loss() const { return inf_loss_; }
  double max_shift() const { return max_shift_; }

  // Returns L(u) and writes L'(u) to *slope.
  double Eval(double u, double* slope) const {
    double top = -kInfinity;
    for (std::size_t j = 0; j < shifts_.size(); ++j) {
      top = std::max(top, Exponent(j, u));
    }
    double sum = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < shifts_.size(); ++j) {
      const double w = std::exp(Exponent(j, u) - top);
      sum += w;
      weighted += w * shifts_[j];
    }
    if (slope != nullptr) *slope = weighted / sum;
    return top + std::log(sum);
  }

  // u with L(u) = loss; -inf at or below the infimum of L.
  double Inverse(double loss, double lo_hint) const {
    if (loss <= inf_loss_) return -kInfinity;
    double lo = std::isfinite(lo_hint) ? lo_hint : -1.0;
    double step = 1.0;
    while (Eval(lo, nullptr) > loss) {
      lo -= step;
      step *= 2.0;
    }
    double hi = lo + 1.0;
    step = 1.0;
    while (Eval(hi, nullptr) < loss) {
      hi += step;
      step *= 2.0;
    }
    double u = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
      double slope = 0.0;
      const double f = Eval(u, &slope) - loss;
      if (f == 0.0) return u;
      if (f > 0.0) {
        hi = u;
      } else {
        lo = u;
      }
      double next = slope > 0.0 ? u - f / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - u) <= 1e-15 * (1.0 + std::abs(u))) return next;
      u = next;
      if (hi - lo <= 1e-15 * (1.0 + std::abs(u))) return u;
    }
    return u;
  }

  // P(U > u) under the mixture sum_j p_j N(d_j, 1).
  double UpperTailP(double u) const {
    double total = 0.0;
    for (std::size_t j = 0; j < shifts_.size(); ++j) {
      total += std::exp(log_probs_[j]) * NormalSf(u - shifts_[j]);
    }
    return total;
  }

 private:
  double Exponent(std::size_t j, double u) const {
    return log_probs_[j] + shifts_[j] * u - 0.5 * shifts_[j] * shifts_[j];
  }

  std::vector<double> log_probs_;
  std::vector<double> shifts_;
  double inf_loss_;
  double max_shift_;
};

// fftw_malloc'd buffers keep alignment, hence the chosen codelets, fixed
// across runs.
template <typename T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};
template <typename T>
using FftwArray = std::unique_ptr<T[], FftwDeleter<T>>;

struct FftwPlan {
  fftw_plan plan;
  explicit FftwPlan(fftw_plan p) : plan(p) {}
  ~FftwPlan() { fftw_destroy_plan(plan); }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
};

std::vector<double> FftConvolve(std::span<const double> a,
                                std::span<const double> b, bool same) {
  const std::size_t out_size = a.size() + b.size() - 1;
  std::size_t n = 1;
  while (n < out_size) n <<= 1;
  const std::size_t nc = n / 2 + 1;
  FftwArray<double> ra(fftw_alloc_real(n));
  FftwArray<double> rb(fftw_alloc_real(n));
  FftwArray<fftw_complex> ca(fftw_alloc_complex(nc));
  FftwArray<fftw_complex> cb(fftw_alloc_complex(nc));
  const int ni = static_cast<int>(n);
  FftwPlan fa(fftw_plan_dft_r2c_1d(ni, ra.get(), ca.get(), FFTW_ESTIMATE));
  FftwPlan fb(fftw_plan_dft_r2c_1d(ni, rb.get(), cb.get(), FFTW_ESTIMATE));
  FftwPlan inv(fftw_plan_dft_c2r_1d(ni, ca.get(), ra.get(), FFTW_ESTIMATE));
  std::fill(ra.get(), ra.get() + n, 0.0);
  std::copy(a.begin(), a.end(), ra.get());
  fftw_execute(fa.plan);
  if (same) {
    std::copy_n(&ca[0][0], 2 * nc, &cb[0][0]);
  } else {
    std::fill(rb.get(), rb.get() + n, 0.0);
    std::copy(b.begin(), b.end(), rb.get());
    fftw_execute(fb.plan);
  }
  for (std::size_t k = 0; k < nc; ++k) {
    const double re = ca[k][0] * cb[k][0] - ca[k][1] * cb[k][1];
    const double im = ca[k][0] * cb[k][1] + ca[k][1] * cb[k][0];
    ca[k][0] = re;
    ca[k][1] = im;
  }
  fftw_execute(inv.plan);
  std::vector<double> out(out_size);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < out_size; ++k) out[k] = ra[k] * scale;
  return out;
}

std::vector<double> DirectConvolve(std::span<const double> a,
                                   std::span<const double> b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

constexpr std::size_t kDirectConvolutionLimit = std::size_t{1} << 22;

// Masses tilted by e^{loss - top}; the tilt commutes with convolution.
std::vector<double> Tilt(const DiscretePld& pld, double* top) {
  double best = -kInfinity;
  for (std::size_t j = 0; j < pld.size(); ++j) {
    if (pld.masses()[j] > 0.0) {
      best = std::max(best, std::log(pld.masses()[j]) + pld.loss(j));
    }
  }
  std::vector<double> out(pld.size(), 0.0);
  for (std::size_t j = 0; j < pld.size(); ++j) {
    if (pld.masses()[j] > 0.0) {
      out[j] = std::exp(std::log(pld.masses()[j]) + pld.loss(j) - best);
    }
  }
  *top = best;
  return out;
}

DiscretePld ConvolveSameRounding(const DiscretePld& a, const DiscretePld& b,
                                 bool same, const PldOptions& options) {
  const std::size_t out_size = a.size() + b.size() - 1;
  CheckCells(out_size, options);
  const std::int64_t offset = a.offset() + b.offset();
  const double h = a.spacing();
  std::vector<double> masses;
  if (a.size() * b.size() <= kDirectConvolutionLimit ||
      std::min(a.size(), b.size()) <= 16) {
    masses = DirectConvolve(a.masses(), b.masses());
  } else {
    // FFT error is absolute relative to the largest entry. Cells with
    // nonnegative loss are taken from the P-tilted convolution, so their
    // contribution to H(P,Q) stays accurate; the rest come from the plain
    // Q-space convolution.
    std::vector<double> plain = FftConvolve(a.masses(), b.masses(), same);
    double top_a = 0.0;
    double top_b = 0.0;
    const std::vector<double> ta = Tilt(a, &top_a);
    const std::vector<double> tb = same ? ta : Tilt(b, &top_b);
    if (same) top_b = top_a;
    const std::vector<double> tilted = FftConvolve(ta, tb, same);
    masses.resize(out_size);
    for (std::size_t k = 0; k < out_size; ++k) {
      const double loss =
          static_cast<double>(offset + static_cast<std::int64_t>(k)) * h;
      double m;
      if (loss >= 0.0) {
        m = tilted[k] > 0.0 ? tilted[k] * std::exp(top_a + top_b - loss) : 0.0;
      } else {
        m = plain[k];
      }
      masses[k] = m > 0.0 ? m : 0.0;
    }
  }
  const double pos = 1.0 - (1.0 - a.pos_inf()) * (1.0 - b.pos_inf());
  const double neg = 1.0 - (1.0 - a.neg_inf()) * (1.0 - b.neg_inf());
  return DiscretePld(offset, h, std::move(masses), pos, neg, a.rounding());
}

// Largest lower cut whose Q-mass stays within tail, smallest upper cut whose
// P-mass stays within tail.
std::pair<std::size_t, std::size_t> TruncationWindow(const DiscretePld& pld,
                                                     double tail) {
  const auto m = pld.masses();
  std::size_t lo = 0;
  double below = 0.0;
  while (lo + 1 < m.size() && below + m[lo] <= tail) below += m[lo++];
  std::size_t hi = m.size() - 1;
  double above = 0.0;
  while (hi > lo) {
    const double p = m[hi] > 0.0 ? std::exp(std::log(m[hi]) + pld.loss(hi)) : 0.0;
    if (above + p > tail) break;
    above += p;
    --hi;
  }
  return {lo, hi};
}

DiscretePld Restrict(const DiscretePld& pld, std::size_t lo, std::size_t hi) {
  const auto m = pld.masses();
  double neg = pld.neg_inf();
  double pos = pld.pos_inf();
  for (std::size_t j = 0; j < lo; ++j) neg += m[j];
  for (std::size_t j = hi + 1; j < m.size(); ++j) {
    if (m[j] > 0.0) pos += std::exp(std::log(m[j]) + pld.loss(j));
  }
  std::vector<double> kept(m.begin() + lo, m.begin() + hi + 1);
  return DiscretePld(pld.offset() + static_cast<std::int64_t>(lo),
                     pld.spacing(), std::move(kept), std::min(pos, 1.0),
                     std::min(neg, 1.0), pld.rounding());
}

PldPair Retruncate(const DiscretePld& up, const DiscretePld& down,
                   double tail) {
  const auto [lo_up, hi_up] = TruncationWindow(up, tail);
  const auto [lo_down, hi_down] = TruncationWindow(down, tail);
  const std::size_t lo = std::min(lo_up, lo_down);
  const std::size_t hi = std::max(hi_up, hi_down);
  return PldPair{Restrict(up, lo, hi), Restrict(down, lo, hi)};
}

}  // namespace

DiscretePld::DiscretePld(std::int64_t offset, double spacing,
                         std::vector<double> masses, double pos_inf,
                         double neg_inf, Rounding rounding)
    : offset_(offset),
      spacing_(spacing),
      masses_(std::move(masses)),
      pos_inf_(pos_inf),
      neg_inf_(neg_inf),
      rounding_(rounding) {
  if (!(spacing_ > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "PLD spacing must be > 0");
  }
  if (masses_.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "PLD needs at least one cell");
  }
  if (!(pos_inf_ >= 0.0 && pos_inf_ <= 1.0 && neg_inf_ >= 0.0 &&
        neg_inf_ <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "PLD atoms must lie in [0, 1]");
  }
  for (double m : masses_) {
    if (!(m >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "PLD masses must be >= 0");
    }
  }
}

DiscretePld DiscretePld::PointMass(double spacing, Rounding rounding) {
  return DiscretePld(0, spacing, {1.0}, 0.0, 0.0, rounding);
}

double DiscretePld::total_mass() const {
  double total = pos_inf_ + neg_inf_;
  for (double m : masses_) total += m;
  return total;
}

double DiscretePld::HockeyStickUp(double eps) const {
  double total = 0.0;
  // Cells at or below eps contribute nothing; start just under the first
  // cell above it.
  const double first = std::floor(eps / spacing_) - 1.0 -
                       static_cast<double>(offset_);
  const std::size_t start =
      first <= 0.0 ? 0
                   : static_cast<std::size_t>(
                         std::min(first, static_cast<double>(masses_.size())));
  for (std::size_t j = start; j < masses_.size(); ++j) {
    const double l = loss(j);
    if (l <= eps || masses_[j] == 0.0) continue;
    total += std::exp(std::log(masses_[j]) + l) * -std::expm1(eps - l);
  }
  return total + pos_inf_;
}

double DiscretePld::HockeyStickDown(double eps) const {
  double total = 0.0;
  for (std::size_t j = 0; j < masses_.size(); ++j) {
    const double l = loss(j);
    if (l >= -eps) break;
    total += masses_[j] * -std::expm1(eps + l);
  }
  return total + neg_inf_;
}

PldPair PldPair::PointMass(double spacing) {
  return PldPair{DiscretePld::PointMass(spacing, Rounding::kCeil),
                 DiscretePld::PointMass(spacing, Rounding::kFloor)};
}

PldPair MixturePld(std::span<const double> probs,
                   std::span<const double> shifts, const PldOptions& options) {
  CheckOptions(options);
  if (probs.size() != shifts.size() || probs.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "mixture needs matching nonempty probs and shifts");
  }
  double total = 0.0;
  double zero_shift = 0.0;
  std::vector<double> log_probs;
  std::vector<double> active;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!(probs[j] >= 0.0) || !(shifts[j] >= 0.0) || !std::isfinite(shifts[j])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "mixture probs and shifts must be >= 0");
    }
    total += probs[j];
    if (probs[j] == 0.0) continue;
    if (shifts[j] == 0.0) {
      zero_shift += probs[j];
    } else {
      log_probs.push_back(std::log(probs[j]));
      active.push_back(shifts[j]);
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::kInvalidArgument, "mixture probs must sum to 1");
  }
  const double h = options.spacing;
  if (active.empty()) return PldPair::PointMass(h);
  if (zero_shift > 0.0) {
    log_probs.push_back(std::log(zero_shift));
    active.push_back(0.0);
  }
  const MixtureLoss loss(std::move(log_probs), std::move(active));

  // Window in u: lower tail by Q-mass, upper tail by P-mass.
  const double tail = options.tail_mass;
  const double u_lo = NormalQuantile(tail);
  double a = 0.0;
  double b = loss.max_shift() + 50.0;
  for (int iter = 0; iter < 200 && b - a > 1e-12; ++iter) {
    const double mid = 0.5 * (a + b);
    if (loss.UpperTailP(mid) > tail) {
      a = mid;
    } else {
      b = mid;
    }
  }
  const double u_hi = b;
  const double l_lo = loss.Eval(u_lo, nullptr);
  const double l_hi = loss.Eval(u_hi, nullptr);
  const auto k_lo = static_cast<std::int64_t>(std::floor(l_lo / h));
  const auto k_hi = static_cast<std::int64_t>(std::ceil(l_hi / h));
  const auto n = static_cast<std::size_t>(k_hi - k_lo + 1);
  CheckCells(n, options);

  // Boundaries b_k = k h; cell (b_{k-1}, b_k] rounds up to b_k and down to
  // b_{k-1}.
  std::vector<double> u(n);
  double hint = -kInfinity;
  for (std::size_t i = 0; i < n; ++i) {
    const double boundary =
        static_cast<double>(k_lo + static_cast<std::int64_t>(i)) * h;
    u[i] = loss.Inverse(boundary, hint);
    if (std::isfinite(u[i])) hint = u[i];
  }
  std::vector<double> ceil_masses(n, 0.0);
  std::vector<double> floor_masses(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double m = NormalInterval(u[i - 1], u[i]);
    ceil_masses[i] = m;
    floor_masses[i - 1] = m;
  }
  const double neg = std::isfinite(u[0]) ? NormalCdf(u[0]) : 0.0;
  const double pos = std::min(1.0, loss.UpperTailP(u[n - 1]));
  return PldPair{
      DiscretePld(k_lo, h, std::move(ceil_masses), pos, neg, Rounding::kCeil),
      DiscretePld(k_lo, h, std::move(floor_masses), pos, neg,
                  Rounding::kFloor)};
}

PldPair GaussianPld(const GaussianSpec& spec, const PldOptions& options) {
  if (!(spec.sensitivity >= 0.0) || !(spec.sigma > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "Gaussian PLD needs sensitivity >= 0 and sigma > 0");
  }
  const double probs[] = {1.0};
  const double shifts[] = {spec.sensitivity / spec.sigma};
  return MixturePld(probs, shifts, options);
}

PldPair SubsampledGaussianStepPld(double q, double shift, double scale,
                                  const PldOptions& options) {
  if (!(q >= 0.0 && q <= 1.0) || !(shift >= 0.0) || !(scale > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "need q in [0,1], shift >= 0 and scale > 0");
  }
  const double probs[] = {1.0 - q, q};
  const double shifts[] = {0.0, shift / scale};
  return MixturePld(probs, shifts, options);
}

double PldDelta(const PldPair& pld, double eps) {
  const double d =
      std::max(pld.up.HockeyStickUp(eps), pld.down.HockeyStickDown(eps));
  return std::clamp(d, 0.0, 1.0);
}

double PldEpsilon(const PldPair& pld, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta must lie in (0, 1)");
  }
  if (std::max(pld.up.pos_inf(), pld.down.neg_inf()) > delta) {
    throw Error(ErrorKind::kUnreachable,
                "an infinity atom exceeds the target delta");
  }
  // Beyond the extreme finite losses both directions reduce to their atoms.
  const double eps_max =
      std::max({0.0, pld.up.loss(pld.up.size() - 1), -pld.down.origin()});
  return InvertDelta([&](double e) { return PldDelta(pld, e); }, delta,
                     eps_max);
}

PldPair Convolve(const PldPair& a, const PldPair& b,
                 const PldOptions& options) {
  if (std::abs(a.spacing() - b.spacing()) > 1e-12 * a.spacing()) {
    throw Error(ErrorKind::kSpacingMismatch, "PLDs use different spacings");
  }
  const bool same = &a == &b;
  DiscretePld up = ConvolveSameRounding(a.up, b.up, same, options);
  DiscretePld down = ConvolveSameRounding(a.down, b.down, same, options);
  return Retruncate(up, down, options.tail_mass);
}

PldPair SelfConvolve(const PldPair& a, int t, const PldOptions& options) {
  if (t < 1) {
    throw Error(ErrorKind::kInvalidArgument, "self-convolution needs t >= 1");
  }
  std::optional<PldPair> result;
  PldPair base = a;
  while (true) {
    if (t & 1) {
      result = result ? Convolve(*result, base, options) : base;
    }
    t >>= 1;
    if (t == 0) break;
    base = Convolve(base, base, options);
  }
  return *result;
}

PldPair DpSgdPld(const DpSgdSpec& spec, const PldOptions& options) {
  CheckOptions(options);
  // (q, sigma) fully determine a single-model step; group them in order of
  // first appearance.
  std::vector<std::pair<std::pair<double, double>, int>> groups;
  for (const DpSgdStep& step : spec.steps) {
    if (step.sampling_rate == 0.0) continue;
    const auto key = std::make_pair(step.sampling_rate, step.noise_multiplier);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.emplace_back(key, 1);
    } else {
      ++it->second;
    }
  }
  std::optional<PldPair> total;
  for (const auto& [key, count] : groups) {
    const PldPair step =
        SubsampledGaussianStepPld(key.first, 1.0, key.second, options);
    PldPair composed = SelfConvolve(step, count, options);
    total = total ? Convolve(*total, composed, options) : std::move(composed);
  }
  return total ? *total : PldPair::PointMass(options.spacing);
}

PldPair MechanismPld(const MechanismSpec& spec, const PldOptions& options) {
  if (spec.is_gaussian()) return GaussianPld(spec.gaussian(), options);
  return DpSgdPld(spec.dpsgd(), options);
}

void WritePldCsv(const DiscretePld& pld, std::ostream& os) {
  os << "# spacing," << FormatDouble(pld.spacing()) << "\n";
  os << "# rounding,"
     << (pld.rounding() == Rounding::kCeil ? "ceil" : "floor") << "\n";
  os << "# atom_pos_inf," << FormatDouble(pld.pos_inf()) << "\n";
  os << "# atom_neg_inf," << FormatDouble(pld.neg_inf()) << "\n";
  os << "loss,mass\n";
  for (std::size_t j = 0; j < pld.size(); ++j) {
    os << FormatDouble(pld.loss(j)) << "," << FormatDouble(pld.masses()[j])
       << "\n";
  }
}

}  // namespace dpmerge
