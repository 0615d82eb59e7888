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

#include "dpmerge/oracle.h"

#include <cmath>
#include <random>
#include <vector>

#include "dpmerge/merge_lc.h"
#include "dpmerge/pld.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace dpmerge {
namespace {

using testing_util::KindOf;

GaussianMixture1D Single(double mean, double variance) {
  return GaussianMixture1D::Create({{1.0, mean, variance}});
}

TEST(GaussianMixture1DTest, Validation) {
  EXPECT_EQ(KindOf([] { GaussianMixture1D::Create({}); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([] { GaussianMixture1D::Create({{0.5, 0.0, 1.0}}); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([] { GaussianMixture1D::Create({{1.0, 0.0, 0.0}}); }),
            ErrorKind::kInvalidArgument);
  EXPECT_NEAR(Single(0.0, 1.0).LogDensity(0.0),
              -0.5 * std::log(2.0 * M_PI), 1e-15);
}

TEST(RenyiQuadratureTest, ClosedFormsAndIdentity) {
  const GaussianMixture1D base = Single(0.0, 1.0);
  EXPECT_NEAR(RenyiQuadrature(base, base, 2.0), 0.0, 1e-12);
  EXPECT_NEAR(RenyiQuadrature(Single(1.0, 1.0), base, 2.0), 1.0, 1e-10);
  for (double ratio : {0.1, 0.5, 1.0, 2.0}) {
    for (double alpha : {2.0, 4.0, 8.0, 16.0, 32.0}) {
      const double exact = alpha * ratio * ratio / 2.0;
      EXPECT_NEAR(RenyiQuadrature(Single(ratio, 1.0), base, alpha), exact,
                  1e-8)
          << ratio << " " << alpha;
    }
  }
  EXPECT_EQ(KindOf([&] { RenyiQuadrature(base, base, 1.0); }),
            ErrorKind::kInvalidArgument);
}

TEST(RenyiQuadratureTest, MixtureReferenceAndLowerBound) {
  const GaussianMixture1D p =
      GaussianMixture1D::Create({{0.5, 0.1, 1.0}, {0.5, 0.1, 4.0}});
  const GaussianMixture1D q =
      GaussianMixture1D::Create({{0.5, 0.0, 1.0}, {0.5, 0.0, 4.0}});
  const double d = RenyiQuadrature(p, q, 2.0);
  // Reference from tests/oracles/derive_values.py.
  EXPECT_NEAR(d, 0.0046088774836700549, 1e-12);
  EXPECT_GT(d, 0.004);
}

TEST(RenyiQuadratureTest, DivergentOrderIsInfinite) {
  // alpha / 1 - (alpha - 1) / 0.25 < 0 for alpha = 2 against a narrow Q.
  EXPECT_TRUE(std::isinf(RenyiQuadrature(Single(0.0, 1.0), Single(0.0, 0.25), 2.0)));
}

TEST(HockeyStickQuadratureTest, MatchesAnalyticGaussian) {
  for (double ratio : {0.5, 1.0, 2.0}) {
    for (double eps : {0.0, 0.5, 1.0, 3.0}) {
      EXPECT_NEAR(HockeyStickQuadrature(Single(ratio, 1.0), Single(0.0, 1.0), eps),
                  AnalyticGaussianDelta(ratio, eps), 1e-11)
          << ratio << " " << eps;
    }
  }
}

TEST(AnalyticGaussianTest, ReferenceValues) {
  // References from tests/oracles/derive_values.py.
  EXPECT_NEAR(AnalyticGaussianDelta(1.0, 1.0), 0.12693673750664395, 1e-14);
  EXPECT_NEAR(AnalyticGaussianDelta(1.0, 0.0), 0.38292492254802621, 1e-14);
  for (double eps : {0.0, 1.0, 5.0}) {
    EXPECT_LT(AnalyticGaussianDelta(1e-9, eps), 1e-9);
    EXPECT_EQ(AnalyticGaussianDelta(0.0, eps), 0.0);
  }
  const double eps = AnalyticGaussianEpsilon(1.0, 1e-5);
  EXPECT_NEAR(AnalyticGaussianDelta(1.0, eps), 1e-5, 1e-9);
  EXPECT_EQ(AnalyticGaussianEpsilon(1.0, 0.5), 0.0);
}

TEST(ToyLcInstanceTest, Validation) {
  EXPECT_EQ(KindOf([] {
              ToyLcInstance::Create({0.5, 0.5}, {{0.0}, {2.0}}, {0.0, 1.0}, 1.0);
            }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([] {
              ToyLcInstance::Create({0.5, 0.6}, {{0.0}, {1.0}}, {0.0, 1.0}, 1.0);
            }),
            ErrorKind::kInvalidArgument);
  const ToyLcInstance ok =
      ToyLcInstance::Create({0.9, 0.1}, {{0.0}, {1.0}}, {0.0, 1.0}, 1.0);
  const std::vector<double> y = {0.3};
  // log(0.9 + 0.1 exp(y - 1/2)) for unit noise.
  EXPECT_NEAR(ok.LogLikelihoodRatio(y), std::log(0.9 + 0.1 * std::exp(-0.2)),
              1e-15);
}

TEST(HockeyStickMcTest, ZeroShiftIsZero) {
  const ToyLcInstance toy = ToyLcInstance::Create(
      {0.5, 0.5}, {{0.0, 0.0}, {0.0, 0.0}}, {0.0, 1.0}, 1.0);
  const HockeyStickEstimate e = HockeyStickMc(toy, 0.0, 100000, 5);
  EXPECT_EQ(e.up.mean, 0.0);
  EXPECT_EQ(e.down.mean, 0.0);
}

TEST(HockeyStickMcTest, OneDimensionalAgreesWithSurrogate) {
  const ToyLcInstance toy =
      ToyLcInstance::Create({0.9, 0.1}, {{0.0}, {1.0}}, {0.0, 1.0}, 1.0);
  const PldPair pld = SubsampledGaussianStepPld(0.1, 1.0, 1.0, PldOptions{});
  for (double eps : {0.0, 0.02, 0.05}) {
    const HockeyStickEstimate e = HockeyStickMc(toy, eps, 1000000, 9);
    EXPECT_NEAR(pld.up.HockeyStickUp(eps), e.up.mean,
                3 * e.up.std_error + 2e-4)
        << eps;
    EXPECT_NEAR(pld.down.HockeyStickDown(eps), e.down.mean,
                3 * e.down.std_error + 2e-4)
        << eps;
  }
}

TEST(HockeyStickMcTest, DeterministicAndSeedSensitive) {
  const ToyLcInstance toy = ToyLcInstance::Create(
      {0.8, 0.1, 0.1}, {{0.0, 0.0}, {0.6, 0.0}, {0.0, 0.7}}, {0.0, 1.0, 1.0},
      1.0);
  const HockeyStickEstimate a = HockeyStickMc(toy, 0.01, 150000, 1);
  const HockeyStickEstimate b = HockeyStickMc(toy, 0.01, 150000, 1);
  const HockeyStickEstimate c = HockeyStickMc(toy, 0.01, 150000, 2);
  EXPECT_EQ(a.up.mean, b.up.mean);
  EXPECT_EQ(a.down.mean, b.down.mean);
  EXPECT_NE(a.up.mean, c.up.mean);
  EXPECT_NEAR(a.up.mean, c.up.mean, 5 * std::hypot(a.up.std_error, c.up.std_error));
}

TEST(ToyLcInstanceTest, FromStepParamsRespectsShiftBounds) {
  const std::vector<MechanismSpec> specs = {
      MechanismSpec::ConstantDpSgd(1, 0.1, 1.0, 1.0, 1.0),
      MechanismSpec::ConstantDpSgd(1, 0.2, 2.0, 1.0, 1.0)};
  const LcStepParams params =
      DeriveStepParams(specs, MergeWeights::Validate(std::vector<double>{0.4, 0.6}), 0);
  std::mt19937_64 rng(17);
  for (bool collinear : {true, false}) {
    const ToyLcInstance toy =
        ToyLcInstance::FromStepParams(params, 3, collinear, rng);
    EXPECT_EQ(toy.dimension(), 3);
    for (std::size_t j = 0; j < params.num_subsets(); ++j) {
      double norm = 0.0;
      for (double v : toy.shifts()[j]) norm += v * v;
      EXPECT_LE(std::sqrt(norm), params.subset_shift[j] + 1e-12);
    }
  }
}

}  // namespace
}  // namespace dpmerge
