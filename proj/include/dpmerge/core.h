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

#ifndef DPMERGE_CORE_H_
#define DPMERGE_CORE_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dpmerge {

// Failure categories surfaced by the accounting library. The CLI maps them
// onto exit codes (see cli.h).
enum class ErrorKind {
  kInvalidArgument,
  kNegativeWeight,
  kZeroMass,
  kGridMismatch,
  kAllInfinite,
  kUnreachable,
  kSpacingMismatch,
  kCellCapExceeded,
  kCorrelatedInputs,
  kDegenerateNoise,
  kEnumerationCapExceeded,
  kDimensionMismatch,
  kDeltaTooLarge,
  kQuadratureFailure,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Entries of a MergeWeights vector sum to one within this tolerance.
inline constexpr double kSimplexTolerance = 1e-12;

// Arithmetic on privacy values that may be +inf (a non-private model).
// x + inf = inf, w * inf = inf for w > 0, and 0 * inf = 0 so that
// zero-weight non-private models drop out of mixtures.
inline double AddPrivacy(double a, double b) { return a + b; }
inline double ScalePrivacy(double weight, double value) {
  return weight == 0.0 ? 0.0 : weight * value;
}

struct DpGuarantee {
  double eps = 0.0;
  double delta = 0.0;

  // Throws kInvalidArgument unless eps >= 0 and delta in [0, 1].
  static DpGuarantee Create(double eps, double delta);
};

// True iff `a` is at least as strong as `b` in both parameters.
bool Dominates(const DpGuarantee& a, const DpGuarantee& b);

// A point on the probability simplex: RS selection probabilities or LC
// combination coefficients.
class MergeWeights {
 public:
  // Normalizes `raw` onto the simplex. Throws kNegativeWeight if an entry is
  // negative (or not finite) and kZeroMass if the entries sum to zero.
  static MergeWeights Validate(std::span<const double> raw);
  static MergeWeights Vertex(std::size_t n, std::size_t index);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const MergeWeights&, const MergeWeights&) = default;

 private:
  explicit MergeWeights(std::vector<double> values)
      : values_(std::move(values)) {}
  std::vector<double> values_;
};

// Enumerates {k / m : k in N^n, sum k = m} with m = round(1 / resolution),
// lexicographically ascending. Throws kInvalidArgument if 1 / resolution is
// not an integer (to 1e-9) or n is zero.
std::vector<MergeWeights> SimplexLattice(std::size_t n, double resolution);

// Strictly increasing Renyi orders, each > 1.
class OrderGrid {
 public:
  static OrderGrid Create(std::vector<double> orders, bool integer_only);
  // Integers lo..hi inclusive, lo >= 2.
  static OrderGrid IntegerRange(int lo, int hi);
  // {1.25, 1.5, 1.75} and the integers 2..64.
  static OrderGrid DefaultMixed();
  // The integers 2..64.
  static OrderGrid DefaultInteger();

  std::span<const double> orders() const { return orders_; }
  bool integer_only() const { return integer_only_; }
  std::size_t size() const { return orders_.size(); }
  double operator[](std::size_t i) const { return orders_[i]; }
  double max_order() const { return orders_.back(); }

  friend bool operator==(const OrderGrid&, const OrderGrid&) = default;

 private:
  OrderGrid(std::vector<double> orders, bool integer_only)
      : orders_(std::move(orders)), integer_only_(integer_only) {}
  std::vector<double> orders_;
  bool integer_only_;
};

struct GaussianSpec {
  double sensitivity = 1.0;
  double sigma = 1.0;
};

// One DP-SGD iteration. A virtual (padding) step has sampling_rate 0 and
// learning_rate 0.
struct DpSgdStep {
  double sampling_rate = 0.0;
  double clip = 1.0;
  double noise_multiplier = 1.0;
  double learning_rate = 1.0;

  friend bool operator==(const DpSgdStep&, const DpSgdStep&) = default;
};

struct DpSgdSpec {
  std::vector<DpSgdStep> steps;
  // False for checkpoints that share noise with another input (same run).
  bool independent_noise = true;

  int num_steps() const { return static_cast<int>(steps.size()); }
};

class MechanismSpec {
 public:
  static MechanismSpec Gaussian(double sensitivity, double sigma);
  static MechanismSpec DpSgd(std::vector<DpSgdStep> steps,
                             bool independent_noise = true);
  static MechanismSpec ConstantDpSgd(int steps, double sampling_rate,
                                     double clip, double noise_multiplier,
                                     double learning_rate,
                                     bool independent_noise = true);

  bool is_gaussian() const {
    return std::holds_alternative<GaussianSpec>(kind_);
  }
  bool is_dpsgd() const { return std::holds_alternative<DpSgdSpec>(kind_); }
  const GaussianSpec& gaussian() const { return std::get<GaussianSpec>(kind_); }
  const DpSgdSpec& dpsgd() const { return std::get<DpSgdSpec>(kind_); }

 private:
  explicit MechanismSpec(std::variant<GaussianSpec, DpSgdSpec> kind)
      : kind_(std::move(kind)) {}
  std::variant<GaussianSpec, DpSgdSpec> kind_;
};

// Throws kInvalidArgument when a step violates the DP-SGD contract.
void ValidateDpSgdSpec(const DpSgdSpec& spec);

// Shortest round-trip decimal (at most 17 significant digits, always with a
// decimal point or exponent). Never depends on the global locale.
std::string FormatDouble(double value);

}  // namespace dpmerge

#endif  // DPMERGE_CORE_H_
