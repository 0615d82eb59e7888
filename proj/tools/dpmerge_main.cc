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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dpmerge/cli.h"

int main(int argc, char** argv) {
  CLI::App app{"Privacy accounting for merged differentially private models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dpmerge::kVersion));

  dpmerge::CliArgs args;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string accountant;
  std::string merge;
  double resolution = 0.0;

  const auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* config = sub->add_option("--config", config_path, "JSON config file");
    if (config_required) config->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Seed overriding the config");
    sub->add_option("--accountant", accountant, "rdp or pld")
        ->check(CLI::IsMember({"rdp", "pld"}));
    sub->add_option("--merge", merge, "rs or lc")
        ->check(CLI::IsMember({"rs", "lc"}));
    sub->add_option("--resolution", resolution, "Weight lattice resolution");
  };

  CLI::App* curve = app.add_subcommand("curve", "Per-mechanism privacy curves");
  add_common(curve, true);
  CLI::App* feasible =
      app.add_subcommand("feasible", "Merge weights meeting a target");
  add_common(feasible, true);
  CLI::App* experiment =
      app.add_subcommand("experiment", "Run a named experiment");
  add_common(experiment, false);
  experiment->add_option("name", args.experiment, "mean-est or dpsgd-sim")
      ->required();
  CLI::App* compare =
      app.add_subcommand("compare", "Renyi versus advanced composition");
  add_common(compare, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dpmerge::kExitConfig;
  }

  CLI::App* chosen = app.get_subcommands().front();
  args.command = chosen->get_name();
  if (chosen->count("--config") > 0) args.config_path = config_path;
  args.out_dir = out_dir;
  if (chosen->count("--seed") > 0) args.seed = seed;
  if (chosen->count("--accountant") > 0) args.accountant = accountant;
  if (chosen->count("--merge") > 0) args.merge = merge;
  if (chosen->count("--resolution") > 0) args.resolution = resolution;
  return dpmerge::RunCli(args, std::cerr);
}
