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

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "dpmerge/baselines.h"
#include "dpmerge/oracle.h"
#include "dpmerge/rdp.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace dpmerge {
namespace {

using ::testing::HasSubstr;
using testing_util::KindOf;

MergeWeights W(std::vector<double> raw) { return MergeWeights::Validate(raw); }

MechanismSpec Sgd(int steps, double q, double clip, double sigma,
                  double eta = 1.0, bool independent = true) {
  return MechanismSpec::ConstantDpSgd(steps, q, clip, sigma, eta, independent);
}

TEST(DeriveStepParamsTest, SingleModelSubstitution) {
  const std::vector<MechanismSpec> specs = {Sgd(1, 0.01, 1.0, 1.0)};
  const LcStepParams p = DeriveStepParams(specs, W({1.0}), 0);
  ASSERT_EQ(p.num_subsets(), 2u);
  EXPECT_DOUBLE_EQ(p.subset_prob[0], 0.99);
  EXPECT_DOUBLE_EQ(p.subset_prob[1], 0.01);
  EXPECT_EQ(p.subset_shift[0], 0.0);
  EXPECT_EQ(p.subset_shift[1], 1.0);
  EXPECT_EQ(p.noise_scale, 1.0);
}

TEST(DeriveStepParamsTest, InvariantsOnThreeModels) {
  const std::vector<MechanismSpec> specs = {Sgd(2, 0.05, 1.0, 1.5, 1.0),
                                            Sgd(2, 0.1, 2.0, 1.0, 0.5),
                                            Sgd(2, 0.2, 0.5, 2.0, 2.0)};
  const MergeWeights lambda = W({0.2, 0.3, 0.5});
  const LcStepParams p = DeriveStepParams(specs, lambda, 1);
  ASSERT_EQ(p.num_subsets(), 8u);
  double total = 0.0;
  for (double r : p.subset_prob) total += r;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(p.subset_prob[0], 0.95 * 0.9 * 0.8);
  EXPECT_EQ(p.subset_shift[0], 0.0);
  const double w[3] = {0.2, 0.3, 0.5};
  EXPECT_DOUBLE_EQ(p.subset_shift[0b101], w[0] + w[2]);
  EXPECT_DOUBLE_EQ(p.noise_scale,
                   std::sqrt(0.3 * 0.3 + 0.3 * 0.3 + 1.0));
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_DOUBLE_EQ(p.normalized_shift[j], p.subset_shift[j] / p.noise_scale);
  }
}

TEST(DeriveStepParamsTest, VertexDependsOnlyOnSelectedModel) {
  const std::vector<MechanismSpec> specs = {Sgd(1, 0.05, 1.0, 1.0),
                                            Sgd(1, 0.1, 2.0, 3.0)};
  const LcStepParams p = DeriveStepParams(specs, MergeWeights::Vertex(2, 1), 0);
  EXPECT_EQ(p.subset_shift[0b01], 0.0);
  EXPECT_EQ(p.subset_shift[0b10], 2.0);
  EXPECT_EQ(p.subset_shift[0b11], 2.0);
  EXPECT_EQ(p.noise_scale, 6.0);
}

TEST(DeriveStepParamsTest, Errors) {
  const std::vector<MechanismSpec> correlated = {
      Sgd(1, 0.05, 1.0, 1.0), Sgd(1, 0.05, 1.0, 1.0, 1.0, false)};
  EXPECT_EQ(KindOf([&] { DeriveStepParams(correlated, W({0.5, 0.5}), 0); }),
            ErrorKind::kCorrelatedInputs);
  const std::vector<MechanismSpec> unaligned = {Sgd(1, 0.05, 1.0, 1.0),
                                                Sgd(2, 0.05, 1.0, 1.0)};
  EXPECT_EQ(KindOf([&] { DeriveStepParams(unaligned, W({0.5, 0.5}), 0); }),
            ErrorKind::kInvalidArgument);
  // Zero noise is rejected when the mechanism is constructed.
  EXPECT_EQ(KindOf([&] { Sgd(1, 0.05, 1.0, 0.0); }),
            ErrorKind::kInvalidArgument);
}

TEST(CompositionCountTest, MatchesBinomialAndEnumeration) {
  EXPECT_EQ(CompositionCount(4, 2), 10u);
  EXPECT_EQ(CompositionCount(4, 64), 47905u);
  EXPECT_EQ(CompositionCount(8, 16), 245157u);
  for (int parts : {1, 2, 4, 8}) {
    for (int order : {2, 3, 5}) {
      std::uint64_t seen = 0;
      ForEachComposition(parts, order, [&](std::span<const int> gamma) {
        int total = 0;
        for (int g : gamma) total += g;
        EXPECT_EQ(total, order);
        EXPECT_EQ(gamma.size(), static_cast<std::size_t>(parts));
        ++seen;
      });
      EXPECT_EQ(seen, CompositionCount(parts, order))
          << parts << " parts, order " << order;
    }
  }
}

TEST(LcStepRdpTest, SingleModelReducesToSubsampledGaussian) {
  for (double q : {0.001, 0.01, 0.1, 0.5, 1.0}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      const std::vector<MechanismSpec> specs = {Sgd(1, q, 1.0, sigma)};
      const LcStepParams p = DeriveStepParams(specs, W({1.0}), 0);
      for (int alpha : {2, 3, 8, 16, 32}) {
        const double expected = SubsampledGaussianRdp(q, sigma, alpha);
        EXPECT_NEAR(LcStepRdp(p, alpha), expected, 1e-12 * (1.0 + expected))
            << q << " " << sigma << " " << alpha;
      }
    }
  }
  const std::vector<MechanismSpec> full = {Sgd(1, 1.0, 1.0, 1.0)};
  EXPECT_NEAR(LcStepRdp(DeriveStepParams(full, W({1.0}), 0), 2), 1.0, 1e-14);
}

TEST(LcStepRdpTest, MatchesHighPrecisionOracle) {
  // References from tests/oracles/derive_values.py.
  const std::vector<MechanismSpec> two = {Sgd(1, 0.05, 1.0, 1.0),
                                          Sgd(1, 0.1, 1.0, 2.0)};
  const LcStepParams p2 = DeriveStepParams(two, W({0.5, 0.5}), 0);
  EXPECT_NEAR(LcStepRdp(p2, 2), 0.005045934990036464, 1e-14);
  EXPECT_NEAR(LcStepRdp(p2, 3), 0.0078280806743332975, 1e-14);
  EXPECT_NEAR(LcStepRdp(p2, 8), 0.02571892737878905, 1e-14);
  const std::vector<MechanismSpec> three = {Sgd(1, 0.05, 1.0, 1.5, 1.0),
                                            Sgd(1, 0.1, 2.0, 1.0, 0.5),
                                            Sgd(1, 0.2, 0.5, 2.0, 2.0)};
  const LcStepParams p3 = DeriveStepParams(three, W({0.2, 0.3, 0.5}), 0);
  EXPECT_NEAR(LcStepRdp(p3, 3), 0.028929227726477967, 1e-14);
}

TEST(LcStepRdpTest, ZeroSamplingIsFree) {
  const std::vector<MechanismSpec> specs = {Sgd(1, 0.0, 1.0, 1.0),
                                            Sgd(1, 0.0, 1.0, 2.0)};
  const LcStepParams p = DeriveStepParams(specs, W({0.5, 0.5}), 0);
  EXPECT_TRUE(p.privacy_free());
  EXPECT_EQ(LcStepRdp(p, 8), 0.0);
}

TEST(LcStepRdpTest, EnumerationCap) {
  const std::vector<MechanismSpec> three = {
      Sgd(1, 0.05, 1.0, 1.0), Sgd(1, 0.05, 1.0, 1.0), Sgd(1, 0.05, 1.0, 1.0)};
  const LcStepParams p = DeriveStepParams(three, W({0.2, 0.3, 0.5}), 0);
  try {
    LcStepRdp(p, 17);
    ADD_FAILURE() << "expected the cap to trip";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEnumerationCapExceeded);
    EXPECT_THAT(e.what(), HasSubstr("16"));
    EXPECT_THAT(e.what(), HasSubstr(std::to_string(CompositionCount(8, 17))));
  }
  const std::vector<MechanismSpec> four(4, Sgd(1, 0.05, 1.0, 1.0));
  const LcStepParams p4 =
      DeriveStepParams(four, W({0.25, 0.25, 0.25, 0.25}), 0);
  EXPECT_EQ(KindOf([&] { LcStepRdp(p4, 2); }),
            ErrorKind::kEnumerationCapExceeded);
  LcOptions wide;
  wide.max_models = 4;
  wide.max_order_override = 2;
  EXPECT_GT(LcStepRdp(p4, 2, wide), 0.0);
}

TEST(LcRdpCurveTest, ConstantStepsScaleLinearlyAndMemoIsTransparent) {
  const std::vector<MechanismSpec> specs = {Sgd(7, 0.05, 1.0, 1.0),
                                            Sgd(7, 0.1, 1.0, 2.0)};
  const MergeWeights lambda = W({0.5, 0.5});
  const OrderGrid grid = OrderGrid::IntegerRange(2, 12);
  const RdpCurve cached = LcRdpCurve(specs, lambda, grid);
  const RdpCurve direct = LcRdpCurve(specs, lambda, grid, {}, false);
  const LcStepParams p = DeriveStepParams(specs, lambda, 0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_EQ(cached[k], direct[k]);
    const double step = LcStepRdp(p, static_cast<int>(grid[k]));
    EXPECT_NEAR(cached[k], 7.0 * step, 1e-12 * cached[k]);
  }
}

TEST(LcRdpCurveTest, VaryingStepsMemoIsTransparent) {
  std::vector<DpSgdStep> a;
  std::vector<DpSgdStep> b;
  for (int t = 0; t < 9; ++t) {
    a.push_back({t % 2 == 0 ? 0.05 : 0.08, 1.0, 1.0, 0.5});
    b.push_back({0.1, 1.0, t < 4 ? 2.0 : 1.5, 1.0});
  }
  const std::vector<MechanismSpec> specs = {MechanismSpec::DpSgd(a),
                                            MechanismSpec::DpSgd(b)};
  const OrderGrid grid = OrderGrid::IntegerRange(2, 20);
  const RdpCurve cached = LcRdpCurve(specs, W({0.3, 0.7}), grid);
  const RdpCurve direct = LcRdpCurve(specs, W({0.3, 0.7}), grid, {}, false);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(cached[k], direct[k]);
}

TEST(LcRdpCurveTest, VertexMatchesSingleModel) {
  const std::vector<MechanismSpec> specs = {Sgd(20, 0.05, 1.0, 1.0),
                                            Sgd(20, 0.1, 3.0, 2.0, 0.7)};
  const OrderGrid grid = OrderGrid::IntegerRange(2, 32);
  for (std::size_t i = 0; i < 2; ++i) {
    const RdpCurve lc = LcRdpCurve(specs, MergeWeights::Vertex(2, i), grid);
    const RdpCurve single = DpSgdRdpCurve(specs[i].dpsgd(), grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      EXPECT_NEAR(lc[k], single[k], 1e-10 * (1.0 + single[k])) << i << " " << k;
    }
  }
}

TEST(LcRdpCurveTest, EmptyHorizonAndGridChecks) {
  // An empty horizon cannot be expressed as a mechanism.
  EXPECT_EQ(KindOf([&] { Sgd(0, 0.05, 1.0, 1.0); }),
            ErrorKind::kInvalidArgument);
  const std::vector<MechanismSpec> one = {Sgd(1, 0.05, 1.0, 1.0)};
  EXPECT_EQ(KindOf([&] {
              LcRdpCurve(one, W({1.0}), OrderGrid::DefaultMixed());
            }),
            ErrorKind::kInvalidArgument);
}

TEST(LcRdpCurveTest, TraceRowsSumToCurve) {
  const std::vector<MechanismSpec> specs = {Sgd(3, 0.05, 1.0, 1.0),
                                            Sgd(3, 0.1, 1.0, 2.0)};
  const OrderGrid grid = OrderGrid::IntegerRange(2, 3);
  std::vector<LcTraceRow> trace;
  const RdpCurve curve = LcRdpCurve(specs, W({0.5, 0.5}), grid, {}, true, &trace);
  ASSERT_EQ(trace.size(), 6u);
  double total = 0.0;
  for (const LcTraceRow& row : trace) {
    if (row.alpha == 2.0) total += row.eps;
  }
  EXPECT_EQ(total, curve[0]);
  std::ostringstream os;
  WriteLcTraceCsv(trace, os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,alpha,eps");
}

TEST(LcDpEpsTest, VertexAndJointComparison) {
  const std::vector<MechanismSpec> specs = {Sgd(50, 0.05, 1.0, 1.0),
                                            Sgd(50, 0.05, 1.0, 1.0)};
  const double single =
      RdpToDp(DpSgdRdpCurve(specs[0].dpsgd(), OrderGrid::DefaultInteger()),
              1e-5)
          .eps;
  EXPECT_NEAR(LcDpEps(specs, MergeWeights::Vertex(2, 0), 1e-5).eps, single,
              1e-10);
  const RdpCurve c = DpSgdRdpCurve(specs[0].dpsgd(), OrderGrid::DefaultInteger());
  const std::vector<RdpCurve> both = {c, c};
  const double joint = RdpToDp(JointRdpBound(both), 1e-5).eps;
  const double lc = LcDpEps(specs, W({0.5, 0.5}), 1e-5).eps;
  EXPECT_LE(lc, joint);
  EXPECT_EQ(KindOf([&] { LcDpEps(specs, W({0.5, 0.5}), 1.0); }),
            ErrorKind::kInvalidArgument);
}

TEST(LcSurrogatePldTest, SingleModelMatchesSubsampledStep) {
  const std::vector<MechanismSpec> specs = {Sgd(1, 0.1, 1.0, 1.0)};
  const PldOptions options;
  const PldPair lc =
      LcStepSurrogatePld(DeriveStepParams(specs, W({1.0}), 0), options);
  const PldPair direct = SubsampledGaussianStepPld(0.1, 1.0, 1.0, options);
  for (double eps : {0.0, 0.1, 0.5}) {
    EXPECT_NEAR(PldDelta(lc, eps), PldDelta(direct, eps), 1e-14);
  }
  const std::vector<MechanismSpec> silent = {Sgd(1, 0.0, 1.0, 1.0),
                                             Sgd(1, 0.0, 1.0, 1.0)};
  const PldPair free =
      LcStepSurrogatePld(DeriveStepParams(silent, W({0.5, 0.5}), 0), options);
  EXPECT_EQ(PldDelta(free, 0.0), 0.0);
}

TEST(LcSurrogatePldTest, DominatesToyMonteCarlo) {
  const std::vector<MechanismSpec> specs = {Sgd(1, 0.05, 1.0, 1.0),
                                            Sgd(1, 0.05, 1.0, 1.0)};
  const LcStepParams params = DeriveStepParams(specs, W({0.5, 0.5}), 0);
  const PldPair pld = LcStepSurrogatePld(params, PldOptions{});
  std::mt19937_64 rng(3);
  for (bool collinear : {true, false}) {
    const ToyLcInstance toy =
        ToyLcInstance::FromStepParams(params, 2, collinear, rng);
    for (double eps : {0.0, 0.02, 0.05}) {
      const HockeyStickEstimate mc = HockeyStickMc(toy, eps, 200000, 11);
      EXPECT_GE(pld.up.HockeyStickUp(eps), mc.up.mean - 3 * mc.up.std_error)
          << collinear << " " << eps;
      EXPECT_GE(pld.down.HockeyStickDown(eps),
                mc.down.mean - 3 * mc.down.std_error)
          << collinear << " " << eps;
    }
  }
}

TEST(LcPldTest, VertexMatchesSinglePipelineAndBeatsJoint) {
  const std::vector<MechanismSpec> specs = {Sgd(10, 0.05, 1.0, 1.0),
                                            Sgd(10, 0.1, 1.0, 2.0)};
  PldOptions options;
  options.spacing = 1e-3;
  const PldPair single = DpSgdPld(specs[0].dpsgd(), options);
  for (double eps : {0.0, 0.3, 1.0}) {
    EXPECT_NEAR(LcPldDelta(specs, MergeWeights::Vertex(2, 0), eps, options),
                PldDelta(single, eps), 1e-10);
  }
  const std::vector<PldPair> both = {single,
                                     DpSgdPld(specs[1].dpsgd(), options)};
  const PldPair joint = JointPldBound(both, options);
  for (double eps : {0.0, 0.3, 1.0}) {
    EXPECT_LE(LcPldDelta(specs, W({0.5, 0.5}), eps, options),
              PldDelta(joint, eps));
  }
}

TEST(AlignVirtualStepsTest, PadsShorterSpecs) {
  const std::vector<MechanismSpec> specs = {Sgd(3, 0.05, 1.0, 1.0),
                                            Sgd(5, 0.1, 1.0, 2.0)};
  const std::vector<MechanismSpec> aligned = AlignVirtualSteps(specs);
  ASSERT_EQ(aligned.size(), 2u);
  EXPECT_EQ(aligned[0].dpsgd().num_steps(), 5);
  EXPECT_EQ(aligned[1].dpsgd().steps, specs[1].dpsgd().steps);
  const DpSgdStep& pad = aligned[0].dpsgd().steps[4];
  EXPECT_EQ(pad.sampling_rate, 0.0);
  EXPECT_EQ(pad.learning_rate, 0.0);
  EXPECT_GT(pad.noise_multiplier * pad.clip, 0.0);
  const OrderGrid grid = OrderGrid::DefaultInteger();
  const RdpCurve before = DpSgdRdpCurve(specs[0].dpsgd(), grid);
  const RdpCurve after = DpSgdRdpCurve(aligned[0].dpsgd(), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_NEAR(after[k], before[k], 1e-12 * (1.0 + before[k]));
  }
  const std::vector<MechanismSpec> single = {specs[0]};
  EXPECT_EQ(AlignVirtualSteps(single)[0].dpsgd().steps, specs[0].dpsgd().steps);
}

TEST(ToDpSgdTest, GaussianBecomesOneFullBatchStep) {
  const MechanismSpec converted = ToDpSgd(MechanismSpec::Gaussian(2.0, 3.0));
  ASSERT_TRUE(converted.is_dpsgd());
  ASSERT_EQ(converted.dpsgd().num_steps(), 1);
  const DpSgdStep& step = converted.dpsgd().steps[0];
  EXPECT_EQ(step.sampling_rate, 1.0);
  EXPECT_EQ(step.clip, 2.0);
  EXPECT_EQ(step.noise_multiplier, 1.5);
  const OrderGrid grid = OrderGrid::IntegerRange(2, 6);
  const RdpCurve a = DpSgdRdpCurve(converted.dpsgd(), grid);
  const RdpCurve b = GaussianRdpCurve({2.0, 3.0}, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
}

TEST(LcCombineTest, WeightedSum) {
  const std::vector<std::vector<double>> unit = {{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_EQ(LcCombine(unit, W({0.25, 0.75})),
            (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(LcCombine(unit, MergeWeights::Vertex(2, 1)), unit[1]);
  const std::vector<std::vector<double>> opposite = {{1.5, -2.0}, {-1.5, 2.0}};
  EXPECT_EQ(LcCombine(opposite, W({0.5, 0.5})), (std::vector<double>{0.0, 0.0}));
  const std::vector<std::vector<double>> ragged = {{1.0}, {1.0, 2.0}};
  EXPECT_EQ(KindOf([&] { LcCombine(ragged, W({0.5, 0.5})); }),
            ErrorKind::kDimensionMismatch);
}

TEST(LcFeasibleSetTest, ExtremesAndSymmetry) {
  const std::vector<MechanismSpec> specs = {Sgd(10, 0.05, 1.0, 1.0),
                                            Sgd(10, 0.05, 1.0, 1.0)};
  AccountingOptions options;
  options.pld.spacing = 1e-3;
  for (Accountant acc : {Accountant::kRdp, Accountant::kPld}) {
    EXPECT_EQ(LcFeasibleSet(specs, DpGuarantee::Create(50.0, 1e-5), 0.25, acc,
                            options)
                  .size(),
              5u);
    EXPECT_TRUE(LcFeasibleSet(specs, DpGuarantee::Create(0.05, 1e-5), 0.25,
                              acc, options)
                    .empty());
  }
  const double vertex = LcDpEps(specs, MergeWeights::Vertex(2, 0), 1e-5).eps;
  const double middle = LcDpEps(specs, W({0.5, 0.5}), 1e-5).eps;
  const auto mid = LcFeasibleSet(
      specs, DpGuarantee::Create(0.5 * (vertex + middle), 1e-5), 0.25,
      Accountant::kRdp, options);
  ASSERT_FALSE(mid.empty());
  for (const FeasibleEntry& e : mid) {
    const MergeWeights flipped = W({e.weights[1], e.weights[0]});
    bool found = false;
    for (const FeasibleEntry& f : mid) found = found || f.weights == flipped;
    EXPECT_TRUE(found);
  }
}

TEST(LcFeasibleSetTest, RejectsCorrelatedInputs) {
  const std::vector<MechanismSpec> specs = {
      Sgd(5, 0.05, 1.0, 1.0), Sgd(5, 0.05, 1.0, 1.0, 1.0, false)};
  EXPECT_EQ(KindOf([&] {
              LcFeasibleSet(specs, DpGuarantee::Create(1.0, 1e-5), 0.5,
                            Accountant::kRdp);
            }),
            ErrorKind::kCorrelatedInputs);
}

}  // namespace
}  // namespace dpmerge
