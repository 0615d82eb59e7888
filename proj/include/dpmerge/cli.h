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

#ifndef DPMERGE_CLI_H_
#define DPMERGE_CLI_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpmerge/accounting.h"
#include "dpmerge/core.h"
#include "dpmerge/experiments.h"

namespace dpmerge {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
};

// Malformed or schema-violating configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Command-line values; flags override the matching config fields.
struct CliArgs {
  std::string command;     // curve, feasible, experiment or compare
  std::string experiment;  // mean-est or dpsgd-sim
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> accountant;
  std::optional<std::string> merge;
  std::optional<double> resolution;
};

struct RunConfig {
  std::vector<MechanismSpec> mechanisms;
  std::optional<DpGuarantee> target;
  std::optional<Accountant> accountant;
  std::optional<MergeKind> merge;
  std::optional<double> resolution;
  AccountingOptions accounting;
  std::uint64_t seed = 42;
  std::vector<double> curve_eps;
  nlohmann::json mean_est = nlohmann::json::object();
  nlohmann::json dpsgd_sim = nlohmann::json::object();
  nlohmann::json compare = nlohmann::json::object();
  // Effective configuration (file plus flag overrides) for hashing.
  nlohmann::json effective;
};

// Validates the schema before anything is computed. Throws ConfigError with
// the offending key path.
RunConfig ParseRunConfig(const nlohmann::json& config, const CliArgs& args);

MeanEstConfig ParseMeanEstConfig(const RunConfig& run);
DpSgdSimConfig ParseDpSgdSimConfig(const RunConfig& run);

// 0 for success, 2 for configuration or validation errors, 3 for numeric or
// capacity failures.
int ExitCodeFor(ErrorKind kind);

// FNV-1a 64 of the canonical JSON text, as 16 hex digits.
std::string ConfigHash(const nlohmann::json& config);

// Writes `contents` to a temporary sibling and renames it over `path`.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::string_view contents);

// Runs one command; diagnostics go to `err`. Returns the exit code.
int RunCli(const CliArgs& args, std::ostream& err);

}  // namespace dpmerge

#endif  // DPMERGE_CLI_H_
