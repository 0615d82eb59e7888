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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gmock/gmock.h"
#include "gtest/gtest.h"

namespace dpmerge {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using ::testing::StartsWith;
using json = nlohmann::json;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::path(::testing::TempDir()) / "dpmerge_cli_test" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  CliArgs Args(const std::string& command, const json& config,
               const std::string& out = "out") {
    const fs::path path = dir_ / (out + ".json");
    std::ofstream(path) << config.dump();
    CliArgs args;
    args.command = command;
    args.config_path = path;
    args.out_dir = dir_ / out;
    return args;
  }

  int Run(const CliArgs& args) {
    err_.str("");
    return RunCli(args, err_);
  }

  static json Gaussian(double sensitivity, double sigma) {
    return {{"type", "gaussian"}, {"sensitivity", sensitivity},
            {"sigma", sigma}};
  }

  fs::path dir_;
  std::ostringstream err_;
};

TEST_F(CliTest, CurveWritesGaussianOrders) {
  const json config = {{"schema_version", 1},
                       {"mechanisms", {Gaussian(1.0, 1.0)}},
                       {"accountant", "rdp"},
                       {"orders", {2, 3, 4}}};
  const CliArgs args = Args("curve", config);
  ASSERT_EQ(Run(args), 0) << err_.str();
  EXPECT_EQ(ReadFile(args.out_dir / "curve_0.csv"),
            "alpha,eps\n2,1.0\n3,1.5\n4,2.0\n");
}

TEST_F(CliTest, CurveOfSilentDpSgdIsZero) {
  const json sgd = {{"type", "dpsgd"},       {"num_steps", 10},
                    {"sampling_rate", 0.0},  {"clip", 1.0},
                    {"noise_multiplier", 1.0}, {"learning_rate", 0.1}};
  const CliArgs args =
      Args("curve", {{"schema_version", 1}, {"mechanisms", {sgd}},
                     {"accountant", "rdp"}});
  ASSERT_EQ(Run(args), 0) << err_.str();
  std::istringstream csv(ReadFile(args.out_dir / "curve_0.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "alpha,eps");
  int rows = 0;
  while (std::getline(csv, line)) {
    EXPECT_EQ(line.substr(line.find(',') + 1), "0.0") << line;
    ++rows;
  }
  EXPECT_GT(rows, 0);
}

TEST_F(CliTest, CurvePldWritesDeltaTableAndDistributions) {
  const json config = {{"schema_version", 1},
                       {"mechanisms", {Gaussian(1.0, 1.0)}},
                       {"accountant", "pld"},
                       {"curve_eps", {0.0, 1.0}}};
  const CliArgs args = Args("curve", config);
  ASSERT_EQ(Run(args), 0) << err_.str();
  const std::string csv = ReadFile(args.out_dir / "curve_0.csv");
  EXPECT_THAT(csv, StartsWith("eps,delta\n0.0,0.38"));
  EXPECT_THAT(csv, HasSubstr("\n1.0,0.1269"));
  EXPECT_THAT(ReadFile(args.out_dir / "pld_0_ceil.csv"),
              StartsWith("# spacing,1e-04\n# rounding,ceil\n"));
  EXPECT_THAT(ReadFile(args.out_dir / "pld_0_floor.csv"),
              HasSubstr("# rounding,floor\n"));
}

TEST_F(CliTest, ConfigErrorsExitTwoNamingTheKey) {
  CliArgs args = Args("curve", {{"schema_version", 1}, {"foo", 1}});
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("unknown key 'foo'"));

  args = Args("curve", {{"schema_version", 1},
                        {"mechanisms", {{{"type", "gaussian"},
                                         {"sensitivity", 1.0},
                                         {"sigma", 1.0},
                                         {"colour", 1}}}}});
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("mechanisms[0].colour"));

  args = Args("curve", {{"schema_version", 1},
                        {"mechanisms", {Gaussian(1.0, -1.0)}}});
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("mechanisms[0]"));

  args = Args("curve", {{"mechanisms", {Gaussian(1.0, 1.0)}}});
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("schema_version"));

  args = Args("curve", json::object());
  std::ofstream(*args.config_path) << "{\"schema_version\": 1,";
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("malformed JSON"));

  args.config_path = dir_ / "missing.json";
  EXPECT_EQ(Run(args), 2);
}

TEST_F(CliTest, FeasibleLooseAndEmptyTargets) {
  json config = {{"schema_version", 1},
                 {"mechanisms", {Gaussian(1.0, 1.0), Gaussian(1.0, 2.0)}},
                 {"target", {{"eps", 100.0}, {"delta", 1e-5}}},
                 {"merge", "rs"},
                 {"accountant", "rdp"},
                 {"resolution", 0.1}};
  CliArgs args = Args("feasible", config, "loose");
  ASSERT_EQ(Run(args), 0) << err_.str();
  const json loose = json::parse(ReadFile(args.out_dir / "feasible.json"));
  ASSERT_EQ(loose.size(), 11u);
  EXPECT_EQ(loose[0]["weights"], json({0.0, 1.0}));
  EXPECT_TRUE(loose[0].contains("eps"));
  EXPECT_TRUE(loose[0].contains("delta"));

  config["target"]["eps"] = 0.01;
  args = Args("feasible", config, "tight");
  ASSERT_EQ(Run(args), 0) << err_.str();
  EXPECT_EQ(json::parse(ReadFile(args.out_dir / "feasible.json")),
            json::array());
}

TEST_F(CliTest, FeasibleFlagsOverrideConfig) {
  const json config = {{"schema_version", 1},
                       {"mechanisms", {Gaussian(1.0, 1.0), Gaussian(1.0, 2.0)}},
                       {"target", {{"eps", 100.0}, {"delta", 1e-5}}},
                       {"merge", "rs"},
                       {"accountant", "rdp"}};
  CliArgs args = Args("feasible", config);
  args.merge = "lc";
  args.accountant = "pld";
  args.resolution = 0.5;
  ASSERT_EQ(Run(args), 0) << err_.str();
  const json out = json::parse(ReadFile(args.out_dir / "feasible.json"));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0]["eps"], 100.0);
  args.accountant = "dp";
  EXPECT_EQ(Run(args), 2);
}

TEST_F(CliTest, RsCoversLcVerticesOnIdenticalModels) {
  json config = {{"schema_version", 1},
                 {"mechanisms", {Gaussian(1.0, 1.0), Gaussian(1.0, 1.0)}},
                 {"target", {{"eps", 6.0}, {"delta", 1e-5}}},
                 {"accountant", "rdp"},
                 {"resolution", 0.25}};
  config["merge"] = "rs";
  CliArgs rs_args = Args("feasible", config, "rs");
  ASSERT_EQ(Run(rs_args), 0) << err_.str();
  config["merge"] = "lc";
  CliArgs lc_args = Args("feasible", config, "lc");
  ASSERT_EQ(Run(lc_args), 0) << err_.str();
  const json rs = json::parse(ReadFile(rs_args.out_dir / "feasible.json"));
  const json lc = json::parse(ReadFile(lc_args.out_dir / "feasible.json"));
  EXPECT_EQ(rs.size(), 5u);
  for (const json& entry : lc) {
    const auto& w = entry["weights"];
    if (w[0] != 1.0 && w[1] != 1.0) continue;
    bool found = false;
    for (const json& r : rs) found = found || r["weights"] == w;
    EXPECT_TRUE(found) << w;
  }
}

TEST_F(CliTest, EnumerationCapExitsThreeWithCount) {
  json sgd = {{"type", "dpsgd"},         {"num_steps", 2},
              {"sampling_rate", 0.05},   {"clip", 1.0},
              {"noise_multiplier", 1.0}, {"learning_rate", 0.1}};
  const json config = {{"schema_version", 1},
                       {"mechanisms", {sgd, sgd, sgd}},
                       {"target", {{"eps", 1.0}, {"delta", 1e-5}}},
                       {"merge", "lc"},
                       {"accountant", "rdp"},
                       {"orders", {2, 40}},
                       {"resolution", 0.5}};
  const CliArgs args = Args("feasible", config);
  EXPECT_EQ(Run(args), 3);
  EXPECT_THAT(err_.str(), HasSubstr("EnumerationCapExceeded"));
  EXPECT_THAT(err_.str(), HasSubstr("62891499"));
}

TEST_F(CliTest, CompareReportsPassAndRejectsLargeDelta) {
  json config = {{"schema_version", 1},
                 {"compare",
                  {{"ratio", 1.0}, {"n", 4}, {"delta", 1e-5},
                   {"delta0", 1e-6}}}};
  CliArgs args = Args("compare", config, "ok");
  ASSERT_EQ(Run(args), 0) << err_.str();
  const json report = json::parse(ReadFile(args.out_dir / "compare.json"));
  EXPECT_EQ(report["pass"], true);
  EXPECT_NEAR(report["eps_rdp"].get<double>(), 10.989744597600075, 1e-12);

  config["compare"]["n"] = 1;
  args = Args("compare", config, "single");
  ASSERT_EQ(Run(args), 0) << err_.str();
  EXPECT_EQ(json::parse(ReadFile(args.out_dir / "compare.json"))["pass"],
            true);

  config["compare"]["delta"] = 0.6;
  args = Args("compare", config, "bad");
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("delta must be < 1/2"));
}

TEST_F(CliTest, MeanEstExperimentIsReproducible) {
  const json config = {{"schema_version", 1}, {"resolution", 0.1}};
  const CliArgs first = Args("experiment", config, "first");
  CliArgs a = first;
  a.experiment = "mean-est";
  ASSERT_EQ(Run(a), 0) << err_.str();
  CliArgs b = Args("experiment", config, "second");
  b.experiment = "mean-est";
  ASSERT_EQ(Run(b), 0) << err_.str();
  const std::string csv = ReadFile(a.out_dir / "mean-est_frontier.csv");
  EXPECT_EQ(csv, ReadFile(b.out_dir / "mean-est_frontier.csv"));
  EXPECT_EQ(ReadFile(a.out_dir / "mean-est_manifest.json"),
            ReadFile(b.out_dir / "mean-est_manifest.json"));
  for (const char* method : {"RS-RDP,", "RS-PLD,", "LC-RDP,", "LC-PLD,"}) {
    EXPECT_THAT(csv, HasSubstr(std::string("\n") + method)) << method;
  }
  const json manifest =
      json::parse(ReadFile(a.out_dir / "mean-est_manifest.json"));
  EXPECT_EQ(manifest["seed"], 42);
  EXPECT_EQ(manifest["version"], std::string(kVersion));
  EXPECT_EQ(manifest["experiment"], "mean-est");
  EXPECT_EQ(manifest["outputs"], json({"mean-est_frontier.csv"}));
}

TEST_F(CliTest, UnknownExperimentExitsTwo) {
  CliArgs args = Args("experiment", {{"schema_version", 1}});
  args.experiment = "cifar";
  EXPECT_EQ(Run(args), 2);
  EXPECT_THAT(err_.str(), HasSubstr("cifar"));
}

TEST_F(CliTest, CorrelatedDpSgdSimRejectsLinearCombination) {
  json config = {{"schema_version", 1},
                 {"resolution", 0.5},
                 {"dpsgd_sim", {{"n_train", 300}, {"n_holdout", 100},
                                {"correlated", true}}}};
  CliArgs args = Args("experiment", config);
  args.experiment = "dpsgd-sim";
  args.merge = "lc";
  EXPECT_EQ(Run(args), 3);
  EXPECT_THAT(err_.str(), HasSubstr("CorrelatedInputs"));
}

TEST(ConfigHashTest, StableAndSensitive) {
  const json a = {{"schema_version", 1}, {"seed", 1}};
  const json b = {{"seed", 1}, {"schema_version", 1}};
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  EXPECT_NE(ConfigHash(a), ConfigHash({{"schema_version", 1}, {"seed", 2}}));
  EXPECT_EQ(ConfigHash(a).size(), 16u);
}

TEST(ExitCodeForTest, Mapping) {
  EXPECT_EQ(ExitCodeFor(ErrorKind::kInvalidArgument), 2);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kDeltaTooLarge), 2);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kDimensionMismatch), 2);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kEnumerationCapExceeded), 3);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kCorrelatedInputs), 3);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kQuadratureFailure), 3);
}

}  // namespace
}  // namespace dpmerge
