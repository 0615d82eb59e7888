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

#include "dpmerge/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <locale>
#include <sstream>
#include <unistd.h>

#include "dpmerge/baselines.h"
#include "dpmerge/merge_lc.h"
#include "dpmerge/merge_rs.h"
#include "dpmerge/pld.h"
#include "dpmerge/rdp.h"

namespace dpmerge {
namespace {

using nlohmann::json;

std::string KeyPath(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

void CheckKeys(const json& obj, const std::string& path,
               std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw ConfigError("key '" + path + "' must be an object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + KeyPath(path, it.key()) + "'");
    }
  }
}

const json* Find(const json& obj, std::string_view key) {
  const auto it = obj.find(std::string(key));
  return it == obj.end() ? nullptr : &*it;
}

std::optional<double> OptNumber(const json& obj, std::string_view key,
                                const std::string& path) {
  const json* v = Find(obj, key);
  if (v == nullptr) return std::nullopt;
  if (!v->is_number()) {
    throw ConfigError("key '" + KeyPath(path, key) + "' must be a number");
  }
  return v->get<double>();
}

double GetNumber(const json& obj, std::string_view key,
                 const std::string& path) {
  const std::optional<double> v = OptNumber(obj, key, path);
  if (!v) throw ConfigError("missing key '" + KeyPath(path, key) + "'");
  return *v;
}

std::optional<std::int64_t> OptInt(const json& obj, std::string_view key,
                                   const std::string& path) {
  const json* v = Find(obj, key);
  if (v == nullptr) return std::nullopt;
  if (!v->is_number_integer()) {
    throw ConfigError("key '" + KeyPath(path, key) + "' must be an integer");
  }
  return v->get<std::int64_t>();
}

std::optional<bool> OptBool(const json& obj, std::string_view key,
                            const std::string& path) {
  const json* v = Find(obj, key);
  if (v == nullptr) return std::nullopt;
  if (!v->is_boolean()) {
    throw ConfigError("key '" + KeyPath(path, key) + "' must be a boolean");
  }
  return v->get<bool>();
}

std::optional<std::string> OptString(const json& obj, std::string_view key,
                                     const std::string& path) {
  const json* v = Find(obj, key);
  if (v == nullptr) return std::nullopt;
  if (!v->is_string()) {
    throw ConfigError("key '" + KeyPath(path, key) + "' must be a string");
  }
  return v->get<std::string>();
}

std::vector<double> NumberArray(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("key '" + path + "' must be an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ConfigError("key '" + path + "[" + std::to_string(i) +
                        "]' must be a number");
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

// Runs `fn`, reporting library validation failures against `path`.
template <typename Fn>
auto AtKey(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw ConfigError("key '" + path + "': " + e.what());
  }
}

Accountant ParseAccountant(const std::string& s, const std::string& where) {
  if (s == "rdp") return Accountant::kRdp;
  if (s == "pld") return Accountant::kPld;
  throw ConfigError(where + " must be \"rdp\" or \"pld\", got \"" + s + "\"");
}

MergeKind ParseMerge(const std::string& s, const std::string& where) {
  if (s == "rs") return MergeKind::kRs;
  if (s == "lc") return MergeKind::kLc;
  throw ConfigError(where + " must be \"rs\" or \"lc\", got \"" + s + "\"");
}

DpSgdStep ParseStep(const json& obj, const std::string& path) {
  return DpSgdStep{.sampling_rate = GetNumber(obj, "sampling_rate", path),
                   .clip = GetNumber(obj, "clip", path),
                   .noise_multiplier = GetNumber(obj, "noise_multiplier", path),
                   .learning_rate = GetNumber(obj, "learning_rate", path)};
}

MechanismSpec ParseMechanism(const json& obj, const std::string& path) {
  if (!obj.is_object()) {
    throw ConfigError("key '" + path + "' must be an object");
  }
  const std::optional<std::string> type = OptString(obj, "type", path);
  if (!type) throw ConfigError("missing key '" + KeyPath(path, "type") + "'");
  if (*type == "gaussian") {
    CheckKeys(obj, path, {"type", "sensitivity", "sigma"});
    const double sensitivity = GetNumber(obj, "sensitivity", path);
    const double sigma = GetNumber(obj, "sigma", path);
    return AtKey(path, [&] {
      return MechanismSpec::Gaussian(sensitivity, sigma);
    });
  }
  if (*type != "dpsgd") {
    throw ConfigError("key '" + KeyPath(path, "type") +
                      "' must be \"gaussian\" or \"dpsgd\", got \"" + *type +
                      "\"");
  }
  CheckKeys(obj, path,
            {"type", "steps", "num_steps", "sampling_rate", "clip",
             "noise_multiplier", "learning_rate", "independent_noise"});
  const bool independent = OptBool(obj, "independent_noise", path).value_or(true);
  std::vector<DpSgdStep> steps;
  if (const json* list = Find(obj, "steps")) {
    for (std::string_view key : {"num_steps", "sampling_rate", "clip",
                                 "noise_multiplier", "learning_rate"}) {
      if (Find(obj, key) != nullptr) {
        throw ConfigError("key '" + KeyPath(path, key) +
                          "' conflicts with '" + KeyPath(path, "steps") + "'");
      }
    }
    const std::string steps_path = KeyPath(path, "steps");
    if (!list->is_array()) {
      throw ConfigError("key '" + steps_path + "' must be an array");
    }
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string step_path = steps_path + "[" + std::to_string(i) + "]";
      CheckKeys((*list)[i], step_path,
                {"sampling_rate", "clip", "noise_multiplier", "learning_rate",
                 "repeat"});
      const std::int64_t repeat =
          OptInt((*list)[i], "repeat", step_path).value_or(1);
      if (repeat < 1 || repeat > 1000000) {
        throw ConfigError("key '" + KeyPath(step_path, "repeat") +
                          "' must lie in 1..1000000");
      }
      const DpSgdStep step = ParseStep((*list)[i], step_path);
      steps.insert(steps.end(), static_cast<std::size_t>(repeat), step);
    }
  } else {
    const std::optional<std::int64_t> count = OptInt(obj, "num_steps", path);
    if (!count) {
      throw ConfigError("missing key '" + KeyPath(path, "num_steps") + "'");
    }
    if (*count < 1 || *count > 1000000) {
      throw ConfigError("key '" + KeyPath(path, "num_steps") +
                        "' must lie in 1..1000000");
    }
    steps.assign(static_cast<std::size_t>(*count), ParseStep(obj, path));
  }
  return AtKey(path, [&] {
    return MechanismSpec::DpSgd(std::move(steps), independent);
  });
}

void CheckSection(const json& config, std::string_view key,
                  std::initializer_list<std::string_view> allowed) {
  if (const json* section = Find(config, key)) {
    CheckKeys(*section, std::string(key), allowed);
  }
}

std::string FormatOrder(double alpha) {
  if (alpha == std::floor(alpha) && std::abs(alpha) < 1e15) {
    return std::to_string(static_cast<long long>(alpha));
  }
  return FormatDouble(alpha);
}

std::ostringstream ClassicStream() {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  return os;
}

double DefaultResolution(std::size_t n_models) {
  return n_models <= 2 ? 0.02 : 0.05;
}

std::vector<Method> SelectMethods(const RunConfig& run) {
  std::vector<Method> out;
  for (const Method& m : AllMethods()) {
    if (run.merge && m.merge != *run.merge) continue;
    if (run.accountant && m.accountant != *run.accountant) continue;
    out.push_back(m);
  }
  return out;
}

int RunCurve(const RunConfig& run, const CliArgs& args) {
  if (run.mechanisms.empty()) {
    throw ConfigError("missing key 'mechanisms'");
  }
  const Accountant accountant = run.accountant.value_or(Accountant::kRdp);
  for (std::size_t i = 0; i < run.mechanisms.size(); ++i) {
    const MechanismSpec& spec = run.mechanisms[i];
    std::ostringstream csv = ClassicStream();
    const std::string index = std::to_string(i);
    if (accountant == Accountant::kRdp) {
      const OrderGrid grid = run.accounting.orders.value_or(
          spec.is_gaussian() ? OrderGrid::DefaultMixed()
                             : OrderGrid::DefaultInteger());
      const RdpCurve curve = MechanismRdpCurve(spec, grid);
      csv << "alpha,eps\n";
      for (std::size_t a = 0; a < curve.size(); ++a) {
        csv << FormatOrder(grid[a]) << "," << FormatDouble(curve[a]) << "\n";
      }
    } else {
      const PldPair pld = MechanismPld(spec, run.accounting.pld);
      csv << "eps,delta\n";
      for (double eps : run.curve_eps) {
        csv << FormatDouble(eps) << "," << FormatDouble(PldDelta(pld, eps))
            << "\n";
      }
      std::ostringstream up = ClassicStream();
      std::ostringstream down = ClassicStream();
      WritePldCsv(pld.up, up);
      WritePldCsv(pld.down, down);
      WriteFileAtomic(args.out_dir / ("pld_" + index + "_ceil.csv"), up.str());
      WriteFileAtomic(args.out_dir / ("pld_" + index + "_floor.csv"),
                      down.str());
    }
    WriteFileAtomic(args.out_dir / ("curve_" + index + ".csv"), csv.str());
  }
  return kExitOk;
}

int RunFeasible(const RunConfig& run, const CliArgs& args) {
  if (run.mechanisms.empty()) throw ConfigError("missing key 'mechanisms'");
  if (!run.target) throw ConfigError("missing key 'target'");
  if (!run.merge) throw ConfigError("missing key 'merge' (or --merge)");
  if (!run.accountant) {
    throw ConfigError("missing key 'accountant' (or --accountant)");
  }
  const double resolution =
      run.resolution.value_or(DefaultResolution(run.mechanisms.size()));
  const std::vector<FeasibleEntry> entries =
      *run.merge == MergeKind::kRs
          ? RsFeasibleSet(run.mechanisms, *run.target, resolution,
                          *run.accountant, run.accounting)
          : LcFeasibleSet(run.mechanisms, *run.target, resolution,
                          *run.accountant, run.accounting);
  WriteFileAtomic(args.out_dir / "feasible.json",
                  FeasibleSetToJson(entries).dump(2) + "\n");
  return kExitOk;
}

json Manifest(const std::string& name, const RunConfig& run,
              const std::vector<std::string>& outputs) {
  return {{"experiment", name},
          {"seed", run.seed},
          {"config_hash", ConfigHash(run.effective)},
          {"version", std::string(kVersion)},
          {"outputs", outputs}};
}

int RunExperiment(const RunConfig& run, const CliArgs& args) {
  const std::string& name = args.experiment;
  std::vector<std::string> outputs;
  if (name == "mean-est") {
    const MeanEstConfig config = ParseMeanEstConfig(run);
    const MeanEstFrontier frontier = ComputeMeanEstFrontier(config);
    const std::vector<Method> methods = SelectMethods(run);
    std::vector<FrontierPoint> points;
    for (const FrontierPoint& p : frontier.points) {
      if (std::find(methods.begin(), methods.end(), p.method) !=
          methods.end()) {
        points.push_back(p);
      }
    }
    std::ostringstream csv = ClassicStream();
    WriteFrontierCsv(points, csv);
    WriteFileAtomic(args.out_dir / (name + "_frontier.csv"), csv.str());
    outputs.push_back(name + "_frontier.csv");
    if (OptBool(run.mean_est, "empirical", "mean_est").value_or(false)) {
      std::ostringstream emp = ClassicStream();
      emp << "merge,w0,w1,mse,std_error,analytic\n";
      for (const EmpiricalMse& e : MeanEstEmpirical(config)) {
        emp << (e.merge == MergeKind::kRs ? "RS" : "LC") << ","
            << FormatDouble(e.weights[0]) << "," << FormatDouble(e.weights[1])
            << "," << FormatDouble(e.mse) << "," << FormatDouble(e.std_error)
            << "," << FormatDouble(e.analytic) << "\n";
      }
      WriteFileAtomic(args.out_dir / (name + "_empirical.csv"), emp.str());
      outputs.push_back(name + "_empirical.csv");
    }
  } else if (name == "dpsgd-sim") {
    const DpSgdSimConfig config = ParseDpSgdSimConfig(run);
    const DpSgdSimResult result = RunDpSgdSim(config);
    std::ostringstream csv = ClassicStream();
    WriteFrontierCsv(result.points, csv);
    WriteFileAtomic(args.out_dir / (name + "_frontier.csv"), csv.str());
    outputs.push_back(name + "_frontier.csv");
    const json feasible = {
        {"target", {{"eps", result.target_eps}, {"delta", config.delta}}},
        {"standalone_eps", result.standalone_eps},
        {"rs", FeasibleSetToJson(result.rs_feasible)},
        {"lc", FeasibleSetToJson(result.lc_feasible)}};
    WriteFileAtomic(args.out_dir / (name + "_feasible.json"),
                    feasible.dump(2) + "\n");
    outputs.push_back(name + "_feasible.json");
  } else {
    throw ConfigError("unknown experiment '" + name +
                      "' (expected mean-est or dpsgd-sim)");
  }
  WriteFileAtomic(args.out_dir / (name + "_manifest.json"),
                  Manifest(name, run, outputs).dump(2) + "\n");
  return kExitOk;
}

int RunCompare(const RunConfig& run, const CliArgs& args) {
  const json& c = run.compare;
  std::optional<double> ratio = OptNumber(c, "ratio", "compare");
  if (!ratio) {
    if (run.mechanisms.empty() || !run.mechanisms.front().is_gaussian()) {
      throw ConfigError(
          "missing key 'compare.ratio' (or a Gaussian first mechanism)");
    }
    const GaussianSpec& g = run.mechanisms.front().gaussian();
    ratio = g.sensitivity / g.sigma;
  }
  std::optional<std::int64_t> n = OptInt(c, "n", "compare");
  if (!n) {
    if (run.mechanisms.empty()) throw ConfigError("missing key 'compare.n'");
    n = static_cast<std::int64_t>(run.mechanisms.size());
  }
  if (*n < 1 || *n > 1000000) {
    throw ConfigError("key 'compare.n' must lie in 1..1000000");
  }
  std::optional<double> delta = OptNumber(c, "delta", "compare");
  if (!delta) {
    if (!run.target) throw ConfigError("missing key 'compare.delta'");
    delta = run.target->delta;
  }
  const double delta0 =
      OptNumber(c, "delta0", "compare").value_or(*delta / 10.0);
  const CompositionReport report =
      CompareGaussianComposition(*ratio, *delta, static_cast<int>(*n), delta0);
  json out = CompositionReportToJson(report);
  out["pass"] = report.holds.value_or(false);
  WriteFileAtomic(args.out_dir / "compare.json", out.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

RunConfig ParseRunConfig(const json& config, const CliArgs& args) {
  if (!config.is_object()) {
    throw ConfigError("configuration must be a JSON object");
  }
  CheckKeys(config, "",
            {"schema_version", "mechanisms", "target", "accountant", "merge",
             "resolution", "orders", "lc_max_order", "lc_max_models",
             "pld_spacing", "pld_tail_mass", "seed", "curve_eps", "mean_est",
             "dpsgd_sim", "compare"});
  const std::optional<std::int64_t> version =
      OptInt(config, "schema_version", "");
  if (!version) throw ConfigError("missing key 'schema_version'");
  if (*version != kConfigSchemaVersion) {
    throw ConfigError("key 'schema_version' must be " +
                      std::to_string(kConfigSchemaVersion) + ", got " +
                      std::to_string(*version));
  }
  CheckSection(config, "mean_est",
               {"n", "clip_low", "clip_high", "sensitivity", "sigma1",
                "sigma2", "trials", "empirical"});
  CheckSection(config, "dpsgd_sim",
               {"n_train", "n_holdout", "dim", "separation", "correlated"});
  CheckSection(config, "compare", {"ratio", "n", "delta", "delta0"});

  RunConfig run;
  if (const json* list = Find(config, "mechanisms")) {
    if (!list->is_array()) throw ConfigError("key 'mechanisms' must be an array");
    for (std::size_t i = 0; i < list->size(); ++i) {
      run.mechanisms.push_back(
          ParseMechanism((*list)[i], "mechanisms[" + std::to_string(i) + "]"));
    }
  }
  if (const json* target = Find(config, "target")) {
    CheckKeys(*target, "target", {"eps", "delta"});
    const double eps = GetNumber(*target, "eps", "target");
    const double delta = GetNumber(*target, "delta", "target");
    run.target = AtKey("target", [&] { return DpGuarantee::Create(eps, delta); });
  }
  if (auto s = args.accountant ? args.accountant
                               : OptString(config, "accountant", "")) {
    run.accountant = ParseAccountant(
        *s, args.accountant ? "--accountant" : "key 'accountant'");
  }
  if (auto s = args.merge ? args.merge : OptString(config, "merge", "")) {
    run.merge = ParseMerge(*s, args.merge ? "--merge" : "key 'merge'");
  }
  run.resolution = args.resolution ? args.resolution
                                   : OptNumber(config, "resolution", "");
  if (run.resolution && !(*run.resolution > 0.0 && *run.resolution <= 1.0)) {
    throw ConfigError("resolution must lie in (0, 1]");
  }
  if (const json* orders = Find(config, "orders")) {
    std::vector<double> values = NumberArray(*orders, "orders");
    const bool integer_only =
        std::all_of(values.begin(), values.end(),
                    [](double a) { return a == std::floor(a); });
    run.accounting.orders = AtKey("orders", [&] {
      return OrderGrid::Create(std::move(values), integer_only);
    });
  }
  if (auto v = OptInt(config, "lc_max_order", "")) {
    if (*v < 2) throw ConfigError("key 'lc_max_order' must be >= 2");
    run.accounting.lc.max_order_override = static_cast<int>(*v);
  }
  if (auto v = OptInt(config, "lc_max_models", "")) {
    if (*v < 1 || *v > 4) {
      throw ConfigError("key 'lc_max_models' must lie in 1..4");
    }
    run.accounting.lc.max_models = static_cast<int>(*v);
  }
  if (auto v = OptNumber(config, "pld_spacing", "")) {
    if (!(*v > 0.0)) throw ConfigError("key 'pld_spacing' must be > 0");
    run.accounting.pld.spacing = *v;
  }
  if (auto v = OptNumber(config, "pld_tail_mass", "")) {
    if (!(*v > 0.0 && *v <= 1e-6)) {
      throw ConfigError("key 'pld_tail_mass' must lie in (0, 1e-6]");
    }
    run.accounting.pld.tail_mass = *v;
  }
  if (args.seed) {
    run.seed = *args.seed;
  } else if (const json* seed = Find(config, "seed")) {
    if (!seed->is_number_unsigned()) {
      throw ConfigError("key 'seed' must be a nonnegative integer");
    }
    run.seed = seed->get<std::uint64_t>();
  }
  if (const json* grid = Find(config, "curve_eps")) {
    run.curve_eps = NumberArray(*grid, "curve_eps");
    for (double e : run.curve_eps) {
      if (!(e >= 0.0) || !std::isfinite(e)) {
        throw ConfigError("key 'curve_eps' entries must be finite and >= 0");
      }
    }
  } else {
    for (int k = 0; k <= 100; ++k) run.curve_eps.push_back(k / 10.0);
  }
  if (const json* s = Find(config, "mean_est")) run.mean_est = *s;
  if (const json* s = Find(config, "dpsgd_sim")) run.dpsgd_sim = *s;
  if (const json* s = Find(config, "compare")) run.compare = *s;

  run.effective = config;
  run.effective["seed"] = run.seed;
  if (args.accountant) run.effective["accountant"] = *args.accountant;
  if (args.merge) run.effective["merge"] = *args.merge;
  if (args.resolution) run.effective["resolution"] = *args.resolution;
  return run;
}

MeanEstConfig ParseMeanEstConfig(const RunConfig& run) {
  const json& m = run.mean_est;
  const std::string path = "mean_est";
  MeanEstConfig config;
  if (auto v = OptInt(m, "n", path)) {
    if (*v < 1 || *v > 100000000) {
      throw ConfigError("key 'mean_est.n' must lie in 1..1e8");
    }
    config.n = static_cast<int>(*v);
  }
  config.clip_low = OptNumber(m, "clip_low", path).value_or(config.clip_low);
  config.clip_high = OptNumber(m, "clip_high", path).value_or(config.clip_high);
  config.sensitivity = OptNumber(m, "sensitivity", path)
                           .value_or((config.clip_high - config.clip_low) /
                                     config.n);
  config.sigma1 =
      OptNumber(m, "sigma1", path).value_or(5.0 * config.sensitivity);
  config.sigma2 = OptNumber(m, "sigma2", path).value_or(config.sensitivity);
  if (auto v = OptInt(m, "trials", path)) {
    if (*v < 1 || *v > 100000000) {
      throw ConfigError("key 'mean_est.trials' must lie in 1..1e8");
    }
    config.trials = static_cast<int>(*v);
  }
  if (run.target) config.delta = run.target->delta;
  config.resolution = run.resolution.value_or(config.resolution);
  config.seed = run.seed;
  config.pld = run.accounting.pld;
  AtKey(path, [&] {
    config.Validate();
    return 0;
  });
  return config;
}

DpSgdSimConfig ParseDpSgdSimConfig(const RunConfig& run) {
  const json& s = run.dpsgd_sim;
  const std::string path = "dpsgd_sim";
  DpSgdSimConfig config = DpSgdSimConfig::Default();
  if (auto v = OptInt(s, "n_train", path)) config.n_train = static_cast<int>(*v);
  if (auto v = OptInt(s, "n_holdout", path)) {
    config.n_holdout = static_cast<int>(*v);
  }
  if (auto v = OptInt(s, "dim", path)) config.dim = static_cast<int>(*v);
  config.separation = OptNumber(s, "separation", path).value_or(config.separation);
  config.correlated = OptBool(s, "correlated", path).value_or(false);
  if (!run.mechanisms.empty()) {
    config.models.clear();
    for (std::size_t i = 0; i < run.mechanisms.size(); ++i) {
      if (!run.mechanisms[i].is_dpsgd()) {
        throw ConfigError("key 'mechanisms[" + std::to_string(i) +
                          "]' must be a dpsgd mechanism for dpsgd-sim");
      }
      config.models.push_back(run.mechanisms[i].dpsgd());
    }
  }
  if (run.target) {
    config.target_eps = run.target->eps;
    config.delta = run.target->delta;
  }
  config.resolution = run.resolution.value_or(config.resolution);
  config.seed = run.seed;
  config.methods = SelectMethods(run);
  config.accounting = run.accounting;
  AtKey(path, [&] {
    config.Validate();
    return 0;
  });
  return config;
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kNegativeWeight:
    case ErrorKind::kZeroMass:
    case ErrorKind::kDeltaTooLarge:
    case ErrorKind::kDimensionMismatch:
      return kExitConfig;
    case ErrorKind::kGridMismatch:
    case ErrorKind::kAllInfinite:
    case ErrorKind::kUnreachable:
    case ErrorKind::kSpacingMismatch:
    case ErrorKind::kCellCapExceeded:
    case ErrorKind::kCorrelatedInputs:
    case ErrorKind::kDegenerateNoise:
    case ErrorKind::kEnumerationCapExceeded:
    case ErrorKind::kQuadratureFailure:
      return kExitNumeric;
  }
  return kExitNumeric;
}

std::string ConfigHash(const json& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return buf;
}

void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

int RunCli(const CliArgs& args, std::ostream& err) {
  try {
    json config = json::object();
    if (args.config_path) {
      std::ifstream in(*args.config_path);
      if (!in) {
        throw ConfigError("cannot read config file '" +
                          args.config_path->string() + "'");
      }
      try {
        config = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in '" + args.config_path->string() +
                          "': " + e.what());
      }
    } else if (args.command != "experiment") {
      throw ConfigError("--config is required for '" + args.command + "'");
    } else {
      config["schema_version"] = kConfigSchemaVersion;
    }
    const RunConfig run = ParseRunConfig(config, args);
    std::filesystem::create_directories(args.out_dir);
    if (args.command == "curve") return RunCurve(run, args);
    if (args.command == "feasible") return RunFeasible(run, args);
    if (args.command == "experiment") return RunExperiment(run, args);
    if (args.command == "compare") return RunCompare(run, args);
    throw ConfigError("unknown command '" + args.command + "'");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error (" << ErrorKindName(e.kind()) << "): " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace dpmerge
