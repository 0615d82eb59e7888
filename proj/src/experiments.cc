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

#include "dpmerge/experiments.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <tuple>
#include <utility>

#include "dpmerge/merge_lc.h"
#include "dpmerge/merge_rs.h"
#include "dpmerge/rdp.h"

namespace dpmerge {
namespace {

constexpr int kSamplingVarianceTrials = 1000000;

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double Clip(double x, double low, double high) {
  return std::min(std::max(x, low), high);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) total += a[k] * b[k];
  return total;
}

void RequireIn(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::kInvalidArgument, message);
}

}  // namespace

std::string MethodName(const Method& method) {
  std::string name = method.merge == MergeKind::kRs ? "RS-" : "LC-";
  name += method.accountant == Accountant::kRdp ? "RDP" : "PLD";
  return name;
}

std::vector<Method> AllMethods() {
  return {{MergeKind::kRs, Accountant::kRdp},
          {MergeKind::kRs, Accountant::kPld},
          {MergeKind::kLc, Accountant::kRdp},
          {MergeKind::kLc, Accountant::kPld}};
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t index) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : purpose) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return SplitMix64(seed ^ SplitMix64(hash ^ SplitMix64(index)));
}

std::vector<FrontierPoint> ParetoExtract(std::span<const FrontierPoint> points,
                                         bool maximize_utility) {
  const auto better_or_equal = [maximize_utility](double a, double b) {
    return maximize_utility ? a >= b : a <= b;
  };
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return points[a].eps < points[b].eps;
                   });
  std::vector<FrontierPoint> kept;
  for (std::size_t i : order) {
    const FrontierPoint& p = points[i];
    const bool dominated =
        std::any_of(points.begin(), points.end(), [&](const FrontierPoint& q) {
          if (!(q.eps <= p.eps) || !better_or_equal(q.utility, p.utility)) {
            return false;
          }
          return q.eps < p.eps || q.utility != p.utility;
        });
    if (!dominated) kept.push_back(p);
  }
  return kept;
}

void WriteFrontierCsv(std::span<const FrontierPoint> points,
                      std::ostream& os) {
  std::size_t n = 0;
  for (const FrontierPoint& p : points) n = std::max(n, p.weights.size());
  os << "method";
  for (std::size_t i = 0; i < n; ++i) os << ",w" << i;
  os << ",eps,delta,utility,utility_stderr\n";
  for (const FrontierPoint& p : points) {
    os << MethodName(p.method);
    for (std::size_t i = 0; i < n; ++i) {
      os << "," << (i < p.weights.size() ? FormatDouble(p.weights[i]) : "");
    }
    os << "," << FormatDouble(p.eps) << "," << FormatDouble(p.delta) << ","
       << FormatDouble(p.utility) << "," << FormatDouble(p.utility_stderr)
       << "\n";
  }
}

void MeanEstConfig::Validate() const {
  RequireIn(n >= 1, "n must be >= 1");
  RequireIn(clip_low <= clip_high, "clip range must satisfy low <= high");
  RequireIn(sensitivity > 0.0 && std::isfinite(sensitivity),
            "sensitivity must be > 0");
  RequireIn(sigma1 >= 0.0 && sigma2 >= 0.0, "noise scales must be >= 0");
  RequireIn(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  RequireIn(trials >= 1, "trials must be >= 1");
}

std::vector<double> GenMeanData(const MeanEstConfig& config,
                                std::uint64_t seed) {
  RequireIn(config.n >= 1, "n must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> out(static_cast<std::size_t>(config.n));
  for (double& x : out) x = Clip(normal(rng), config.clip_low, config.clip_high);
  return out;
}

double ClippedNormalMean(double low, double high) {
  const auto pdf = [](double x) {
    return std::isinf(x) ? 0.0
                         : std::exp(-0.5 * x * x) /
                               std::sqrt(2.0 * std::numbers::pi);
  };
  const auto cdf = [](double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
  };
  // E[clip(X)] = low P(X < low) + high P(X > high) + int_low^high x phi(x).
  const double low_part = std::isinf(low) ? 0.0 : low * cdf(low);
  const double high_part = std::isinf(high) ? 0.0 : high * cdf(-high);
  return low_part + high_part + pdf(low) - pdf(high);
}

double SamplingVariance(const MeanEstConfig& config) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, double> cache;
  const auto key = std::make_tuple(config.n, config.clip_low, config.clip_high);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double mu = ClippedNormalMean(config.clip_low, config.clip_high);
  std::mt19937_64 rng(DeriveSeed(0, "sampling-variance",
                                 static_cast<std::uint64_t>(config.n)));
  std::normal_distribution<double> normal;
  double total = 0.0;
  for (int t = 0; t < kSamplingVarianceTrials; ++t) {
    double sum = 0.0;
    for (int j = 0; j < config.n; ++j) {
      sum += Clip(normal(rng), config.clip_low, config.clip_high);
    }
    const double err = sum / config.n - mu;
    total += err * err;
  }
  const double value = total / kSamplingVarianceTrials;
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, value);
  return value;
}

double MergedNoiseVariance(MergeKind merge, double weight,
                           const MeanEstConfig& config) {
  RequireIn(weight >= 0.0 && weight <= 1.0, "weight must lie in [0, 1]");
  const double v1 = config.sigma1 * config.sigma1;
  const double v2 = config.sigma2 * config.sigma2;
  if (merge == MergeKind::kRs) return weight * v1 + (1.0 - weight) * v2;
  return weight * weight * v1 + (1.0 - weight) * (1.0 - weight) * v2;
}

double MeanEstAnalyticMse(MergeKind merge, double weight,
                          const MeanEstConfig& config) {
  return MergedNoiseVariance(merge, weight, config) + SamplingVariance(config);
}

MeanEstFrontier ComputeMeanEstFrontier(const MeanEstConfig& config) {
  config.Validate();
  RequireIn(config.sigma1 > 0.0 && config.sigma2 > 0.0,
            "frontier needs positive noise scales");
  const std::vector<MergeWeights> lattice = SimplexLattice(2, config.resolution);
  const OrderGrid grid = OrderGrid::DefaultMixed();
  const GaussianSpec g1{config.sensitivity, config.sigma1};
  const GaussianSpec g2{config.sensitivity, config.sigma2};
  const std::vector<RdpCurve> curves = {GaussianRdpCurve(g1, grid),
                                        GaussianRdpCurve(g2, grid)};
  const std::vector<PldPair> plds = {GaussianPld(g1, config.pld),
                                     GaussianPld(g2, config.pld)};
  MeanEstFrontier out;
  for (const Method& method : AllMethods()) {
    std::vector<FrontierPoint> points;
    for (const MergeWeights& w : lattice) {
      FrontierPoint p{method, w, 0.0, config.delta,
                      MeanEstAnalyticMse(method.merge, w[0], config), 0.0};
      if (method.merge == MergeKind::kRs) {
        p.eps = method.accountant == Accountant::kRdp
                    ? RsDpEps(curves, w, config.delta).eps
                    : RsPldEpsilon(plds, w, config.delta);
      } else {
        const GaussianSpec merged{
            config.sensitivity,
            std::sqrt(MergedNoiseVariance(MergeKind::kLc, w[0], config))};
        p.eps = method.accountant == Accountant::kRdp
                    ? RdpToDp(GaussianRdpCurve(merged, grid), config.delta).eps
                    : PldEpsilon(GaussianPld(merged, config.pld), config.delta);
      }
      points.push_back(std::move(p));
    }
    const std::vector<FrontierPoint> pareto =
        ParetoExtract(points, /*maximize_utility=*/false);
    out.points.insert(out.points.end(), points.begin(), points.end());
    out.pareto.insert(out.pareto.end(), pareto.begin(), pareto.end());
  }
  return out;
}

std::vector<EmpiricalMse> MeanEstEmpirical(const MeanEstConfig& config) {
  config.Validate();
  const std::vector<MergeWeights> lattice = SimplexLattice(2, config.resolution);
  const double mu = ClippedNormalMean(config.clip_low, config.clip_high);
  const std::size_t m = lattice.size();
  // Sums of squared error and its square: RS rows then LC rows.
  std::vector<double> sum(2 * m, 0.0);
  std::vector<double> sum_sq(2 * m, 0.0);
  for (int k = 0; k < config.trials; ++k) {
    const auto index = static_cast<std::uint64_t>(k);
    const std::vector<double> data =
        GenMeanData(config, DeriveSeed(config.seed, "mean-est-data", index));
    const double mean =
        std::accumulate(data.begin(), data.end(), 0.0) / config.n;
    std::mt19937_64 rng(DeriveSeed(config.seed, "mean-est-noise", index));
    const double z = std::normal_distribution<double>()(rng);
    const double u = std::uniform_real_distribution<double>()(rng);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = lattice[i][0];
      const double rs_sigma = u < w ? config.sigma1 : config.sigma2;
      const double lc_sigma =
          std::sqrt(MergedNoiseVariance(MergeKind::kLc, w, config));
      const double rs_err = mean + rs_sigma * z - mu;
      const double lc_err = mean + lc_sigma * z - mu;
      sum[i] += rs_err * rs_err;
      sum_sq[i] += rs_err * rs_err * rs_err * rs_err;
      sum[m + i] += lc_err * lc_err;
      sum_sq[m + i] += lc_err * lc_err * lc_err * lc_err;
    }
  }
  const auto trials = static_cast<double>(config.trials);
  std::vector<EmpiricalMse> out;
  for (MergeKind merge : {MergeKind::kRs, MergeKind::kLc}) {
    const std::size_t base = merge == MergeKind::kRs ? 0 : m;
    for (std::size_t i = 0; i < m; ++i) {
      const double mse = sum[base + i] / trials;
      const double var =
          trials > 1.0
              ? std::max(0.0, (sum_sq[base + i] / trials - mse * mse) *
                                  trials / (trials - 1.0))
              : 0.0;
      out.push_back({merge, lattice[i], mse, std::sqrt(var / trials),
                     MeanEstAnalyticMse(merge, lattice[i][0], config)});
    }
  }
  return out;
}

Dataset GenBlobs(int n, int dim, double separation, std::uint64_t seed) {
  RequireIn(n >= 1 && dim >= 1, "blobs need n >= 1 and dim >= 1");
  Dataset data;
  data.dim = dim;
  data.features.resize(static_cast<std::size_t>(n) *
                       static_cast<std::size_t>(dim));
  data.labels.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  const double offset = 0.5 * separation / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const int label = coin(rng) ? 1 : 0;
    data.labels[i] = label;
    for (std::size_t k = 0; k < static_cast<std::size_t>(dim); ++k) {
      data.features[i * static_cast<std::size_t>(dim) + k] =
          (label == 1 ? offset : -offset) + normal(rng);
    }
  }
  return data;
}

std::vector<double> LogisticGradient(std::span<const double> theta,
                                     std::span<const double> x, int label) {
  const double z = Dot(theta, x);
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                            : std::exp(z) / (1.0 + std::exp(z));
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = (p - label) * x[k];
  return g;
}

DpSgdTrace DpSgdTrain(const DpSgdSpec& spec, const Dataset& data,
                      int model_dim, std::uint64_t seed) {
  ValidateDpSgdSpec(spec);
  if (model_dim != data.dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                "model dimension " + std::to_string(model_dim) +
                    " differs from data dimension " + std::to_string(data.dim));
  }
  const auto dim = static_cast<std::size_t>(model_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform;
  DpSgdTrace trace;
  std::vector<double> theta(dim, 0.0);
  trace.checkpoints.push_back(theta);
  for (const DpSgdStep& step : spec.steps) {
    if (step.sampling_rate == 0.0 && step.learning_rate == 0.0) {
      trace.batch_sizes.push_back(0);
      trace.checkpoints.push_back(theta);
      continue;
    }
    std::vector<double> update(dim, 0.0);
    int batch = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!(uniform(rng) < step.sampling_rate)) continue;
      ++batch;
      std::vector<double> g = LogisticGradient(theta, data.row(i),
                                               data.labels[i]);
      const double norm = std::sqrt(Dot(g, g));
      const double scale = norm > step.clip ? step.clip / norm : 1.0;
      double clipped_sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double c = g[k] * scale;
        update[k] += c;
        clipped_sq += c * c;
      }
      trace.max_clipped_norm =
          std::max(trace.max_clipped_norm, std::sqrt(clipped_sq));
    }
    std::normal_distribution<double> noise(0.0,
                                           step.noise_multiplier * step.clip);
    for (std::size_t k = 0; k < dim; ++k) {
      theta[k] -= step.learning_rate * (update[k] + noise(rng));
    }
    trace.batch_sizes.push_back(batch);
    trace.checkpoints.push_back(theta);
  }
  return trace;
}

double Accuracy(std::span<const double> theta, const Dataset& data) {
  if (theta.size() != static_cast<std::size_t>(data.dim)) {
    throw Error(ErrorKind::kDimensionMismatch,
                "parameter and data dimensions differ");
  }
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int predicted = Dot(theta, data.row(i)) > 0.0 ? 1 : 0;
    if (predicted == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double MergedEval(std::span<const std::vector<double>> models,
                  const MergeWeights& weights, MergeKind merge,
                  const Dataset& holdout, RsUtility rs_utility,
                  std::uint64_t seed) {
  if (models.size() != weights.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "got " + std::to_string(models.size()) + " models for " +
                    std::to_string(weights.size()) + " weights");
  }
  if (merge == MergeKind::kLc) {
    return Accuracy(LcCombine(models, weights), holdout);
  }
  if (rs_utility == RsUtility::kSampled) {
    return Accuracy(models[RsSample(weights, seed)], holdout);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (weights[i] > 0.0) total += weights[i] * Accuracy(models[i], holdout);
  }
  return total;
}

DpSgdSimConfig DpSgdSimConfig::Default() {
  DpSgdSimConfig config;
  const double n = config.n_train;
  config.models = {
      MechanismSpec::ConstantDpSgd(100, 0.05, 1.0, 1.0, 0.5 / (0.05 * n))
          .dpsgd(),
      MechanismSpec::ConstantDpSgd(100, 0.1, 1.0, 2.0, 0.5 / (0.1 * n))
          .dpsgd(),
  };
  return config;
}

void DpSgdSimConfig::Validate() const {
  RequireIn(n_train >= 1 && n_train <= 5000, "n_train must lie in 1..5000");
  RequireIn(n_holdout >= 1, "n_holdout must be >= 1");
  RequireIn(dim >= 1 && dim <= 16, "dim must lie in 1..16");
  RequireIn(models.size() >= 2 && models.size() <= 4,
            "dpsgd-sim needs 2 to 4 models");
  RequireIn(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  RequireIn(!target_eps.has_value() || *target_eps >= 0.0,
            "target eps must be >= 0");
  for (const DpSgdSpec& spec : models) {
    RequireIn(!spec.steps.empty(), "every model needs at least one step");
    ValidateDpSgdSpec(spec);
  }
}

DpSgdSimResult RunDpSgdSim(const DpSgdSimConfig& config) {
  config.Validate();
  const Dataset train =
      GenBlobs(config.n_train, config.dim, config.separation,
               DeriveSeed(config.seed, "blobs-train", 0));
  const Dataset holdout =
      GenBlobs(config.n_holdout, config.dim, config.separation,
               DeriveSeed(config.seed, "blobs-holdout", 0));

  std::vector<MechanismSpec> specs;
  std::vector<std::vector<double>> params;
  const std::size_t n_models = config.models.size();
  if (config.correlated) {
    // Checkpoints at evenly spaced prefixes of the first model's run.
    const DpSgdSpec& run = config.models.front();
    const DpSgdTrace trace =
        DpSgdTrain(run, train, config.dim, DeriveSeed(config.seed, "train", 0));
    const std::size_t horizon = run.steps.size();
    for (std::size_t i = 0; i < n_models; ++i) {
      const std::size_t len = std::max<std::size_t>(
          1, horizon * (i + 1) / n_models);
      specs.push_back(MechanismSpec::DpSgd(
          std::vector<DpSgdStep>(run.steps.begin(), run.steps.begin() + len),
          /*independent_noise=*/false));
      params.push_back(trace.checkpoints[len]);
    }
  } else {
    for (std::size_t i = 0; i < n_models; ++i) {
      const DpSgdTrace trace =
          DpSgdTrain(config.models[i], train, config.dim,
                     DeriveSeed(config.seed, "train", i));
      specs.push_back(MechanismSpec::DpSgd(config.models[i].steps));
      params.push_back(trace.checkpoints.back());
    }
  }

  DpSgdSimResult result;
  const OrderGrid grid =
      config.accounting.orders.value_or(OrderGrid::DefaultInteger());
  std::vector<RdpCurve> curves;
  for (const MechanismSpec& spec : specs) {
    curves.push_back(MechanismRdpCurve(spec, grid));
    result.standalone_eps.push_back(RdpToDp(curves.back(), config.delta).eps);
  }
  const auto [lo, hi] = std::minmax_element(result.standalone_eps.begin(),
                                            result.standalone_eps.end());
  result.target_eps = config.target_eps.value_or(0.5 * (*lo + *hi));

  const bool wants_lc = std::any_of(
      config.methods.begin(), config.methods.end(),
      [](const Method& m) { return m.merge == MergeKind::kLc; });
  const bool wants_rs_pld = std::any_of(
      config.methods.begin(), config.methods.end(), [](const Method& m) {
        return m.merge == MergeKind::kRs && m.accountant == Accountant::kPld;
      });
  const std::vector<MechanismSpec> aligned =
      wants_lc ? AlignVirtualSteps(specs) : std::vector<MechanismSpec>{};
  std::vector<PldPair> plds;
  if (wants_rs_pld) {
    for (const MechanismSpec& spec : specs) {
      plds.push_back(MechanismPld(spec, config.accounting.pld));
    }
  }

  const std::vector<MergeWeights> lattice =
      SimplexLattice(n_models, config.resolution);
  for (const Method& method : config.methods) {
    for (const MergeWeights& w : lattice) {
      FrontierPoint p{method, w, 0.0, config.delta, 0.0, 0.0};
      if (method.merge == MergeKind::kRs) {
        p.eps = method.accountant == Accountant::kRdp
                    ? RsDpEps(curves, w, config.delta).eps
                    : RsPldEpsilon(plds, w, config.delta);
        p.utility = MergedEval(params, w, MergeKind::kRs, holdout);
        double var = 0.0;
        for (std::size_t i = 0; i < n_models; ++i) {
          const double acc = Accuracy(params[i], holdout);
          var += w[i] * w[i] * acc * (1.0 - acc) /
                 static_cast<double>(holdout.size());
        }
        p.utility_stderr = std::sqrt(var);
      } else {
        p.eps = method.accountant == Accountant::kRdp
                    ? LcDpEps(aligned, w, config.delta, grid,
                              config.accounting.lc)
                          .eps
                    : PldEpsilon(LcPld(aligned, w, config.accounting.pld),
                                 config.delta);
        p.utility = MergedEval(params, w, MergeKind::kLc, holdout);
        p.utility_stderr = std::sqrt(p.utility * (1.0 - p.utility) /
                                     static_cast<double>(holdout.size()));
      }
      result.points.push_back(std::move(p));
    }
  }

  const DpGuarantee target = DpGuarantee::Create(result.target_eps,
                                                 config.delta);
  result.rs_feasible = RsFeasibleSet(specs, target, config.resolution,
                                     Accountant::kRdp, config.accounting);
  if (wants_lc) {
    result.lc_feasible = LcFeasibleSet(specs, target, config.resolution,
                                       Accountant::kRdp, config.accounting);
  }
  return result;
}

}  // namespace dpmerge
