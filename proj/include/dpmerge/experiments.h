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

#ifndef DPMERGE_EXPERIMENTS_H_
#define DPMERGE_EXPERIMENTS_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpmerge/accounting.h"
#include "dpmerge/core.h"
#include "dpmerge/pld.h"

namespace dpmerge {

enum class MergeKind { kRs, kLc };

struct Method {
  MergeKind merge = MergeKind::kRs;
  Accountant accountant = Accountant::kRdp;
  friend bool operator==(const Method&, const Method&) = default;
};

// "RS-RDP", "RS-PLD", "LC-RDP" or "LC-PLD".
std::string MethodName(const Method& method);
// The four methods in the order above.
std::vector<Method> AllMethods();

// Stable 64-bit sub-seed for (seed, purpose, index).
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t index);

struct FrontierPoint {
  Method method;
  MergeWeights weights;
  double eps = 0.0;
  double delta = 0.0;
  double utility = 0.0;
  double utility_stderr = 0.0;
};

// Non-dominated points under (minimize eps, optimize utility), stably sorted
// by eps. Exact ties are all kept.
std::vector<FrontierPoint> ParetoExtract(std::span<const FrontierPoint> points,
                                         bool maximize_utility);

// Header "method,w0,...,w{N-1},eps,delta,utility,utility_stderr".
void WriteFrontierCsv(std::span<const FrontierPoint> points, std::ostream& os);

// --- Mean estimation -------------------------------------------------------

// Two Gaussian releases of the clipped empirical mean of n standard normal
// draws under replace-one adjacency.
struct MeanEstConfig {
  int n = 100;
  double clip_low = -1.0;
  double clip_high = 1.0;
  double sensitivity = 0.02;  // (clip_high - clip_low) / n
  double sigma1 = 0.1;        // 5 * sensitivity
  double sigma2 = 0.02;       // sensitivity
  double delta = 1e-5;
  double resolution = 0.02;
  int trials = 10000;
  std::uint64_t seed = 42;
  PldOptions pld;

  // Throws kInvalidArgument for out-of-range fields.
  void Validate() const;
};

std::vector<double> GenMeanData(const MeanEstConfig& config,
                                std::uint64_t seed);

// E[clip(X)] for X ~ N(0, 1).
double ClippedNormalMean(double low, double high);

// Variance of the clipped empirical mean, measured once per
// (n, clip range) by 10^6 fixed-seed trials and cached.
double SamplingVariance(const MeanEstConfig& config);

// Output noise variance of the merged release with weight w on model 1:
// RS: w s1^2 + (1-w) s2^2; LC: w^2 s1^2 + (1-w)^2 s2^2.
double MergedNoiseVariance(MergeKind merge, double weight,
                           const MeanEstConfig& config);

double MeanEstAnalyticMse(MergeKind merge, double weight,
                          const MeanEstConfig& config);

struct MeanEstFrontier {
  std::vector<FrontierPoint> points;  // lattice order within each method
  std::vector<FrontierPoint> pareto;  // per method, in method order
};

// Certified eps at config.delta and analytic MSE for every lattice weight
// under all four methods.
MeanEstFrontier ComputeMeanEstFrontier(const MeanEstConfig& config);

struct EmpiricalMse {
  MergeKind merge = MergeKind::kRs;
  MergeWeights weights;
  double mse = 0.0;
  double std_error = 0.0;
  double analytic = 0.0;
};

// Monte-Carlo MSE over fresh data and noise. Trial k draws from
// DeriveSeed(seed, "mean-est-trial", k).
std::vector<EmpiricalMse> MeanEstEmpirical(const MeanEstConfig& config);

// --- Synthetic DP-SGD --------------------------------------------------------

// Row-major features with labels in {0, 1}.
struct Dataset {
  int dim = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(
        i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  }
};

// Two Gaussian blobs N(+-separation/2 * 1/sqrt(d) * 1, I) with balanced
// random labels.
Dataset GenBlobs(int n, int dim, double separation, std::uint64_t seed);

// Logistic-loss gradient of one example.
std::vector<double> LogisticGradient(std::span<const double> theta,
                                     std::span<const double> x, int label);

struct DpSgdTrace {
  std::vector<std::vector<double>> checkpoints;  // theta_0 .. theta_T
  double max_clipped_norm = 0.0;                 // over every example, step
  std::vector<int> batch_sizes;
};

// Per step: Poisson batch at rate q, per-example gradients clipped to C,
// theta -= eta * (sum of clipped gradients + N(0, (sigma C)^2 I)). Starts at
// zero. Throws kDimensionMismatch if model_dim differs from data.dim.
DpSgdTrace DpSgdTrain(const DpSgdSpec& spec, const Dataset& data,
                      int model_dim, std::uint64_t seed);

double Accuracy(std::span<const double> theta, const Dataset& data);

enum class RsUtility { kExpected, kSampled };

// LC: holdout accuracy of the combined parameters. RS: expected accuracy
// sum_i pi_i acc_i, or the accuracy of one seeded draw.
double MergedEval(std::span<const std::vector<double>> models,
                  const MergeWeights& weights, MergeKind merge,
                  const Dataset& holdout,
                  RsUtility rs_utility = RsUtility::kExpected,
                  std::uint64_t seed = 0);

struct DpSgdSimConfig {
  int n_train = 2000;
  int n_holdout = 1000;
  int dim = 8;
  double separation = 2.0;
  std::vector<DpSgdSpec> models;
  double delta = 1e-5;
  // Target eps for the feasibility sets; midpoint of the standalone RDP
  // eps values when unset.
  std::optional<double> target_eps;
  double resolution = 0.05;
  // Merges checkpoints of one run (shared noise) instead of separate runs.
  bool correlated = false;
  std::uint64_t seed = 42;
  std::vector<Method> methods = AllMethods();
  AccountingOptions accounting;

  static DpSgdSimConfig Default();
  void Validate() const;
};

struct DpSgdSimResult {
  std::vector<double> standalone_eps;  // RDP eps of each model at delta
  double target_eps = 0.0;
  std::vector<FrontierPoint> points;
  std::vector<FeasibleEntry> rs_feasible;  // at (target_eps, delta)
  std::vector<FeasibleEntry> lc_feasible;
};

// Trains the models, then certifies and evaluates every lattice weight.
// With `correlated`, the models are checkpoints of the first model's run and
// any LC method throws kCorrelatedInputs.
DpSgdSimResult RunDpSgdSim(const DpSgdSimConfig& config);

}  // namespace dpmerge

#endif  // DPMERGE_EXPERIMENTS_H_
