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

#include "dpmerge/merge_lc.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace dpmerge {
namespace {

constexpr int kMaxSubsetModels = 16;

std::vector<MechanismSpec> AsDpSgd(std::span<const MechanismSpec> specs) {
  std::vector<MechanismSpec> out;
  out.reserve(specs.size());
  for (const MechanismSpec& spec : specs) out.push_back(ToDpSgd(spec));
  return out;
}

// Common horizon of aligned, independent-noise DP-SGD specs.
int CheckAligned(std::span<const MechanismSpec> specs,
                 const MergeWeights& lambda) {
  if (specs.empty() || specs.size() != lambda.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "got " + std::to_string(specs.size()) + " models for " +
                    std::to_string(lambda.size()) + " weights");
  }
  if (specs.size() > kMaxSubsetModels) {
    throw Error(ErrorKind::kInvalidArgument, "too many models for LC");
  }
  int horizon = -1;
  for (const MechanismSpec& spec : specs) {
    if (!spec.is_dpsgd()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "LC step accounting needs DP-SGD specs");
    }
    if (!spec.dpsgd().independent_noise) {
      throw Error(ErrorKind::kCorrelatedInputs,
                  "LC accounting needs independently noised inputs");
    }
    ValidateDpSgdSpec(spec.dpsgd());
    const int steps = spec.dpsgd().num_steps();
    if (horizon >= 0 && steps != horizon) {
      throw Error(ErrorKind::kInvalidArgument,
                  "specs have different horizons; align virtual steps first");
    }
    horizon = steps;
  }
  return horizon;
}

// Everything about step t that the per-step bound depends on.
std::vector<double> StepKey(std::span<const MechanismSpec> specs, int step) {
  std::vector<double> key;
  key.reserve(4 * specs.size());
  for (const MechanismSpec& spec : specs) {
    const DpSgdStep& s = spec.dpsgd().steps[static_cast<std::size_t>(step)];
    key.insert(key.end(), {s.sampling_rate, s.clip, s.noise_multiplier,
                           s.learning_rate});
  }
  return key;
}

void CheckEnumerationCap(int n_models, int max_order,
                         const LcOptions& options) {
  const int parts = 1 << n_models;
  if (n_models > options.max_models) {
    throw Error(ErrorKind::kEnumerationCapExceeded,
                std::to_string(n_models) + " models exceed the cap of " +
                    std::to_string(options.max_models) + "; |N_alpha| = " +
                    std::to_string(CompositionCount(parts, max_order)) +
                    " at alpha = " + std::to_string(max_order));
  }
  const int cap = options.MaxOrder(n_models);
  if (max_order > cap) {
    throw Error(ErrorKind::kEnumerationCapExceeded,
                "order " + std::to_string(max_order) + " exceeds the cap " +
                    std::to_string(cap) + " for " + std::to_string(n_models) +
                    " models; |N_alpha| = " +
                    std::to_string(CompositionCount(parts, max_order)) +
                    " versus " + std::to_string(CompositionCount(parts, cap)) +
                    " at the cap");
  }
}

void WarnIfOverridden(int n_models, int max_order, const LcOptions& options) {
  if (!options.max_order_override.has_value()) return;
  const LcOptions defaults;
  if (max_order <= defaults.MaxOrder(n_models)) return;
  std::clog << "warning: LC enumeration at order " << max_order << " with "
            << n_models << " models visits "
            << CompositionCount(1 << n_models, max_order)
            << " compositions per step\n";
}

void Enumerate(int parts, int remaining, int index, std::vector<int>& counts,
               const std::function<void(std::span<const int>)>& visit) {
  if (index == parts - 1) {
    counts[static_cast<std::size_t>(index)] = remaining;
    visit(counts);
    return;
  }
  for (int c = remaining; c >= 0; --c) {
    counts[static_cast<std::size_t>(index)] = c;
    Enumerate(parts, remaining - c, index + 1, counts, visit);
  }
}

}  // namespace

bool LcStepParams::privacy_free() const {
  for (std::size_t j = 0; j < subset_prob.size(); ++j) {
    if (subset_prob[j] > 0.0 && subset_shift[j] > 0.0) return false;
  }
  return true;
}

LcStepParams DeriveStepParams(std::span<const MechanismSpec> specs,
                              const MergeWeights& lambda, int step) {
  const int horizon = CheckAligned(specs, lambda);
  if (step < 0 || step >= horizon) {
    throw Error(ErrorKind::kInvalidArgument,
                "step " + std::to_string(step) + " outside the horizon " +
                    std::to_string(horizon));
  }
  const auto n = static_cast<int>(specs.size());
  const std::size_t subsets = std::size_t{1} << n;
  std::vector<double> q(specs.size());
  std::vector<double> w(specs.size());
  double variance = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const DpSgdStep& s = specs[i].dpsgd().steps[static_cast<std::size_t>(step)];
    q[i] = s.sampling_rate;
    w[i] = lambda[i] * s.learning_rate * s.clip;
    const double noise = w[i] * s.noise_multiplier;
    variance += noise * noise;
  }
  LcStepParams params;
  params.n_models = n;
  params.subset_prob.assign(subsets, 1.0);
  params.subset_shift.assign(subsets, 0.0);
  params.noise_scale = std::sqrt(variance);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    double prob = 1.0;
    double shift = 0.0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if ((mask >> i) & 1U) {
        prob *= q[i];
        shift += w[i];
      } else {
        prob *= 1.0 - q[i];
      }
    }
    params.subset_prob[mask] = prob;
    params.subset_shift[mask] = shift;
  }
  params.normalized_shift.assign(subsets, 0.0);
  if (params.privacy_free()) return params;
  if (!(params.noise_scale > 0.0)) {
    throw Error(ErrorKind::kDegenerateNoise,
                "step " + std::to_string(step) +
                    " moves the combined output without any noise");
  }
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    params.normalized_shift[mask] =
        params.subset_shift[mask] / params.noise_scale;
  }
  return params;
}

std::uint64_t CompositionCount(int parts, int order) {
  if (parts <= 0 || order < 0) return 0;
  const auto n = static_cast<unsigned __int128>(order + parts - 1);
  const auto k = static_cast<unsigned __int128>(parts - 1);
  constexpr auto kMax = static_cast<unsigned __int128>(UINT64_MAX);
  unsigned __int128 result = 1;
  for (unsigned __int128 i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > kMax) return UINT64_MAX;
  }
  return static_cast<std::uint64_t>(result);
}

void ForEachComposition(
    int parts, int order,
    const std::function<void(std::span<const int>)>& visit) {
  if (parts <= 0 || order < 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "compositions need parts >= 1 and order >= 0");
  }
  std::vector<int> counts(static_cast<std::size_t>(parts), 0);
  Enumerate(parts, order, 0, counts, visit);
}

double LcStepRdp(const LcStepParams& params, int alpha,
                 const LcOptions& options) {
  if (alpha < 2) {
    throw Error(ErrorKind::kInvalidArgument, "LC order must be >= 2");
  }
  CheckEnumerationCap(params.n_models, alpha, options);
  if (params.privacy_free()) return 0.0;

  // Subsets with rho_J = 0 contribute nothing; enumerate over the rest.
  std::vector<double> log_prob;
  std::vector<double> shift;
  for (std::size_t j = 0; j < params.num_subsets(); ++j) {
    if (params.subset_prob[j] > 0.0) {
      log_prob.push_back(std::log(params.subset_prob[j]));
      shift.push_back(params.normalized_shift[j]);
    }
  }
  std::vector<double> log_factorial(static_cast<std::size_t>(alpha) + 1);
  for (int k = 0; k <= alpha; ++k) {
    log_factorial[static_cast<std::size_t>(k)] =
        std::lgamma(static_cast<double>(k) + 1.0);
  }

  // Streaming log-sum-exp: sum holds sum exp(term - running_max).
  double running_max = -kInfinity;
  double sum = 0.0;
  double pruned_max = -kInfinity;
  double pruned_count = 0.0;
  const double prune = options.prune_nats;
  ForEachComposition(
      static_cast<int>(log_prob.size()), alpha, [&](std::span<const int> g) {
        double term = log_factorial[static_cast<std::size_t>(alpha)];
        double linear = 0.0;
        double square = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (g[j] == 0) continue;
          const double c = g[j];
          term += c * log_prob[j] - log_factorial[static_cast<std::size_t>(g[j])];
          linear += c * shift[j];
          square += c * shift[j] * shift[j];
        }
        term += 0.5 * (linear * linear - square);
        if (term < running_max - prune) {
          pruned_max = std::max(pruned_max, term);
          pruned_count += 1.0;
          return;
        }
        if (term > running_max) {
          sum = sum * std::exp(running_max - term) + 1.0;
          running_max = term;
        } else {
          sum += std::exp(term - running_max);
        }
      });
  if (pruned_count > 0.0) {
    sum += pruned_count * std::exp(pruned_max - running_max);
  }
  const double log_total = running_max + std::log(sum);
  return std::max(0.0, log_total / static_cast<double>(alpha - 1));
}

RdpCurve LcRdpCurve(std::span<const MechanismSpec> specs,
                    const MergeWeights& lambda, const OrderGrid& grid,
                    const LcOptions& options, bool memoize,
                    std::vector<LcTraceRow>* trace) {
  if (!grid.integer_only()) {
    throw Error(ErrorKind::kInvalidArgument,
                "LC Renyi accounting needs an integer order grid");
  }
  const std::vector<MechanismSpec> dpsgd = AsDpSgd(specs);
  const int horizon = CheckAligned(dpsgd, lambda);
  const auto n = static_cast<int>(dpsgd.size());
  const auto max_order = static_cast<int>(grid.max_order());
  CheckEnumerationCap(n, max_order, options);
  WarnIfOverridden(n, max_order, options);

  std::vector<double> total(grid.size(), 0.0);
  std::map<std::vector<double>, std::vector<double>> cache;
  for (int t = 0; t < horizon; ++t) {
    std::vector<double> per_order;
    std::vector<double> key;
    if (memoize) {
      key = StepKey(dpsgd, t);
      if (auto it = cache.find(key); it != cache.end()) per_order = it->second;
    }
    if (per_order.empty()) {
      const LcStepParams params = DeriveStepParams(dpsgd, lambda, t);
      per_order.resize(grid.size());
      for (std::size_t a = 0; a < grid.size(); ++a) {
        per_order[a] =
            LcStepRdp(params, static_cast<int>(grid[a]), options);
      }
      if (memoize) cache.emplace(std::move(key), per_order);
    }
    for (std::size_t a = 0; a < grid.size(); ++a) {
      total[a] += per_order[a];
      if (trace != nullptr) trace->push_back({t, grid[a], per_order[a]});
    }
  }
  return RdpCurve(grid, std::move(total));
}

RdpConversion LcDpEps(std::span<const MechanismSpec> specs,
                      const MergeWeights& lambda, double delta,
                      const OrderGrid& grid, const LcOptions& options) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta must lie in (0, 1)");
  }
  return RdpToDp(LcRdpCurve(specs, lambda, grid, options), delta);
}

PldPair LcStepSurrogatePld(const LcStepParams& params,
                           const PldOptions& options) {
  if (params.privacy_free()) return PldPair::PointMass(options.spacing);
  if (!(params.noise_scale > 0.0)) {
    throw Error(ErrorKind::kDegenerateNoise,
                "surrogate needs a positive mixed noise scale");
  }
  return MixturePld(params.subset_prob, params.normalized_shift, options);
}

PldPair LcPld(std::span<const MechanismSpec> specs, const MergeWeights& lambda,
              const PldOptions& options) {
  const std::vector<MechanismSpec> dpsgd = AsDpSgd(specs);
  const int horizon = CheckAligned(dpsgd, lambda);
  // Identical step tuples, in order of first appearance.
  std::vector<std::pair<std::vector<double>, int>> groups;
  std::vector<int> first_step;
  for (int t = 0; t < horizon; ++t) {
    std::vector<double> key = StepKey(dpsgd, t);
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.emplace_back(std::move(key), 1);
      first_step.push_back(t);
    } else {
      ++it->second;
    }
  }
  std::optional<PldPair> total;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const LcStepParams params = DeriveStepParams(dpsgd, lambda, first_step[g]);
    if (params.privacy_free()) continue;
    PldPair composed = SelfConvolve(LcStepSurrogatePld(params, options),
                                    groups[g].second, options);
    total = total ? Convolve(*total, composed, options) : std::move(composed);
  }
  return total ? *total : PldPair::PointMass(options.spacing);
}

double LcPldDelta(std::span<const MechanismSpec> specs,
                  const MergeWeights& lambda, double eps,
                  const PldOptions& options) {
  return PldDelta(LcPld(specs, lambda, options), eps);
}

std::vector<MechanismSpec> AlignVirtualSteps(
    std::span<const MechanismSpec> specs) {
  if (specs.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "nothing to align");
  }
  int horizon = 0;
  for (const MechanismSpec& spec : specs) {
    if (!spec.is_dpsgd()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "virtual steps apply to DP-SGD specs only");
    }
    horizon = std::max(horizon, spec.dpsgd().num_steps());
  }
  std::vector<MechanismSpec> out;
  out.reserve(specs.size());
  for (const MechanismSpec& spec : specs) {
    std::vector<DpSgdStep> steps = spec.dpsgd().steps;
    steps.resize(static_cast<std::size_t>(horizon),
                 DpSgdStep{.sampling_rate = 0.0,
                           .clip = 1.0,
                           .noise_multiplier = 1.0,
                           .learning_rate = 0.0});
    out.push_back(
        MechanismSpec::DpSgd(std::move(steps), spec.dpsgd().independent_noise));
  }
  return out;
}

MechanismSpec ToDpSgd(const MechanismSpec& spec) {
  if (spec.is_dpsgd()) return spec;
  const GaussianSpec& g = spec.gaussian();
  if (!(g.sensitivity > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "Gaussian sensitivity must be positive to form a DP-SGD step");
  }
  return MechanismSpec::DpSgd({DpSgdStep{.sampling_rate = 1.0,
                                         .clip = g.sensitivity,
                                         .noise_multiplier =
                                             g.sigma / g.sensitivity,
                                         .learning_rate = 1.0}});
}

std::vector<double> LcCombine(std::span<const std::vector<double>> models,
                              const MergeWeights& lambda) {
  if (models.empty() || models.size() != lambda.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "got " + std::to_string(models.size()) + " models for " +
                    std::to_string(lambda.size()) + " weights");
  }
  const std::size_t dim = models.front().size();
  for (const std::vector<double>& m : models) {
    if (m.size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "parameter vectors have dimensions " + std::to_string(dim) +
                      " and " + std::to_string(m.size()));
    }
  }
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (lambda[i] == 0.0) continue;
    for (std::size_t k = 0; k < dim; ++k) out[k] += lambda[i] * models[i][k];
  }
  return out;
}

std::vector<FeasibleEntry> LcFeasibleSet(std::span<const MechanismSpec> models,
                                         const DpGuarantee& target,
                                         double resolution,
                                         Accountant accountant,
                                         const AccountingOptions& options) {
  if (models.empty() || models.size() > 4) {
    throw Error(ErrorKind::kInvalidArgument,
                "LC feasibility supports 1 to 4 models, got " +
                    std::to_string(models.size()));
  }
  const std::vector<MechanismSpec> aligned = AlignVirtualSteps(AsDpSgd(models));
  const std::vector<MergeWeights> lattice =
      SimplexLattice(models.size(), resolution);
  std::vector<FeasibleEntry> feasible;
  if (accountant == Accountant::kRdp) {
    if (!(target.delta > 0.0 && target.delta < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "RDP feasibility needs target delta in (0, 1)");
    }
    const OrderGrid grid = options.orders.value_or(OrderGrid::DefaultInteger());
    for (const MergeWeights& lambda : lattice) {
      const double eps =
          LcDpEps(aligned, lambda, target.delta, grid, options.lc).eps;
      if (eps <= target.eps) feasible.push_back({lambda, eps, target.delta});
    }
  } else {
    for (const MergeWeights& lambda : lattice) {
      const double delta = LcPldDelta(aligned, lambda, target.eps, options.pld);
      if (delta <= target.delta) {
        feasible.push_back({lambda, target.eps, delta});
      }
    }
  }
  return feasible;
}

void WriteLcTraceCsv(std::span<const LcTraceRow> rows, std::ostream& os) {
  os << "step,alpha,eps\n";
  for (const LcTraceRow& row : rows) {
    os << row.step << "," << static_cast<long long>(row.alpha) << ","
       << FormatDouble(row.eps) << "\n";
  }
}

}  // namespace dpmerge
