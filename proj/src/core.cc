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

#include "dpmerge/core.h"

#include <charconv>
#include <cmath>
#include <sstream>

namespace dpmerge {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "InvalidArgument";
    case ErrorKind::kNegativeWeight:
      return "NegativeWeight";
    case ErrorKind::kZeroMass:
      return "ZeroMass";
    case ErrorKind::kGridMismatch:
      return "GridMismatch";
    case ErrorKind::kAllInfinite:
      return "AllInfinite";
    case ErrorKind::kUnreachable:
      return "Unreachable";
    case ErrorKind::kSpacingMismatch:
      return "SpacingMismatch";
    case ErrorKind::kCellCapExceeded:
      return "CellCapExceeded";
    case ErrorKind::kCorrelatedInputs:
      return "CorrelatedInputs";
    case ErrorKind::kDegenerateNoise:
      return "DegenerateNoise";
    case ErrorKind::kEnumerationCapExceeded:
      return "EnumerationCapExceeded";
    case ErrorKind::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorKind::kDeltaTooLarge:
      return "DeltaTooLarge";
    case ErrorKind::kQuadratureFailure:
      return "QuadratureFailure";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

DpGuarantee DpGuarantee::Create(double eps, double delta) {
  if (!(eps >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "eps must be nonnegative");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta must lie in [0, 1]");
  }
  return DpGuarantee{eps, delta};
}

bool Dominates(const DpGuarantee& a, const DpGuarantee& b) {
  return a.eps <= b.eps && a.delta <= b.delta;
}

MergeWeights MergeWeights::Validate(std::span<const double> raw) {
  if (raw.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "weights must be nonempty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw[i] >= 0.0) || !std::isfinite(raw[i])) {
      std::ostringstream os;
      os << "weight " << i << " is " << raw[i];
      throw Error(ErrorKind::kNegativeWeight, os.str());
    }
    sum += raw[i];
  }
  if (sum == 0.0) {
    throw Error(ErrorKind::kZeroMass, "weights sum to zero");
  }
  std::vector<double> values(raw.begin(), raw.end());
  // Already-normalized input is kept bit-for-bit, which makes validation
  // idempotent.
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    for (double& v : values) v /= sum;
  }
  return MergeWeights(std::move(values));
}

MergeWeights MergeWeights::Vertex(std::size_t n, std::size_t index) {
  if (index >= n) {
    throw Error(ErrorKind::kInvalidArgument, "vertex index out of range");
  }
  std::vector<double> values(n, 0.0);
  values[index] = 1.0;
  return MergeWeights(std::move(values));
}

std::vector<MergeWeights> SimplexLattice(std::size_t n, double resolution) {
  if (n == 0) {
    throw Error(ErrorKind::kInvalidArgument, "lattice needs n >= 1");
  }
  if (!(resolution > 0.0 && resolution <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "resolution must lie in (0, 1]");
  }
  const double steps_real = 1.0 / resolution;
  const long steps = std::lround(steps_real);
  if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real) {
    throw Error(ErrorKind::kInvalidArgument,
                "resolution must divide 1 into an integer lattice");
  }
  std::vector<MergeWeights> out;
  std::vector<long> counts(n, 0);
  // Odometer over the first n-1 coordinates; the last takes the remainder.
  auto emit = [&](long used) {
    counts[n - 1] = steps - used;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = static_cast<double>(counts[i]) / static_cast<double>(steps);
    }
    out.push_back(MergeWeights::Validate(w));
  };
  if (n == 1) {
    emit(0);
    return out;
  }
  long used = 0;
  while (true) {
    emit(used);
    // Advance the rightmost free coordinate that still has room.
    std::size_t pos = n - 1;
    while (pos > 0) {
      --pos;
      if (used < steps) {
        ++counts[pos];
        ++used;
        break;
      }
      used -= counts[pos];
      counts[pos] = 0;
      if (pos == 0) return out;
    }
  }
}

OrderGrid OrderGrid::Create(std::vector<double> orders, bool integer_only) {
  if (orders.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "order grid is empty");
  }
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const double a = orders[i];
    if (!(a > 1.0) || !std::isfinite(a)) {
      throw Error(ErrorKind::kInvalidArgument, "orders must be finite and > 1");
    }
    if (i > 0 && !(a > orders[i - 1])) {
      throw Error(ErrorKind::kInvalidArgument,
                  "orders must be strictly increasing");
    }
    if (integer_only && (a != std::floor(a) || a < 2.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "integer grids need integer orders >= 2");
    }
  }
  return OrderGrid(std::move(orders), integer_only);
}

OrderGrid OrderGrid::IntegerRange(int lo, int hi) {
  std::vector<double> orders;
  for (int a = lo; a <= hi; ++a) orders.push_back(a);
  return Create(std::move(orders), true);
}

OrderGrid OrderGrid::DefaultMixed() {
  std::vector<double> orders = {1.25, 1.5, 1.75};
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  return Create(std::move(orders), false);
}

OrderGrid OrderGrid::DefaultInteger() { return IntegerRange(2, 64); }

void ValidateDpSgdSpec(const DpSgdSpec& spec) {
  for (std::size_t t = 0; t < spec.steps.size(); ++t) {
    const DpSgdStep& s = spec.steps[t];
    std::ostringstream where;
    where << "step " << t << ": ";
    if (!(s.sampling_rate >= 0.0 && s.sampling_rate <= 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  where.str() + "sampling rate must lie in [0, 1]");
    }
    if (!(s.clip > 0.0) || !std::isfinite(s.clip)) {
      throw Error(ErrorKind::kInvalidArgument, where.str() + "clip must be > 0");
    }
    if (!(s.noise_multiplier > 0.0) || !std::isfinite(s.noise_multiplier)) {
      throw Error(ErrorKind::kInvalidArgument,
                  where.str() + "noise multiplier must be > 0");
    }
    const bool is_virtual = s.sampling_rate == 0.0 && s.learning_rate == 0.0;
    if (!is_virtual &&
        (!(s.learning_rate > 0.0) || !std::isfinite(s.learning_rate))) {
      throw Error(ErrorKind::kInvalidArgument,
                  where.str() + "learning rate must be > 0");
    }
  }
}

MechanismSpec MechanismSpec::Gaussian(double sensitivity, double sigma) {
  if (!(sensitivity > 0.0) || !std::isfinite(sensitivity)) {
    throw Error(ErrorKind::kInvalidArgument, "sensitivity must be > 0");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::kInvalidArgument, "sigma must be > 0");
  }
  return MechanismSpec(GaussianSpec{sensitivity, sigma});
}

MechanismSpec MechanismSpec::DpSgd(std::vector<DpSgdStep> steps,
                                   bool independent_noise) {
  DpSgdSpec spec{std::move(steps), independent_noise};
  if (spec.steps.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "DP-SGD needs at least one step");
  }
  ValidateDpSgdSpec(spec);
  return MechanismSpec(std::move(spec));
}

MechanismSpec MechanismSpec::ConstantDpSgd(int steps, double sampling_rate,
                                           double clip, double noise_multiplier,
                                           double learning_rate,
                                           bool independent_noise) {
  if (steps < 1) {
    throw Error(ErrorKind::kInvalidArgument, "DP-SGD needs at least one step");
  }
  return DpSgd(std::vector<DpSgdStep>(
                   steps, DpSgdStep{sampling_rate, clip, noise_multiplier,
                                    learning_rate}),
               independent_noise);
}

std::string FormatDouble(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  std::string out(buf, res.ptr);
  if (std::isfinite(value) &&
      out.find_first_of(".e") == std::string::npos) {
    out += ".0";
  }
  return out;
}

}  // namespace dpmerge
