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

#include "dpmerge/baselines.h"

#include <algorithm>
#include <cmath>

namespace dpmerge {

RdpCurve JointRdpBound(std::span<const RdpCurve> curves) {
  return ComposeRdp(curves);
}

PldPair JointPldBound(std::span<const PldPair> plds,
                      const PldOptions& options) {
  if (plds.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "joint bound of no PLDs");
  }
  PldPair total = plds.front();
  for (std::size_t i = 1; i < plds.size(); ++i) {
    total = Convolve(total, plds[i], options);
  }
  return total;
}

CompositionReport AdvancedComposition(double eps, double delta, int n,
                                      double delta0) {
  if (delta >= 0.5) {
    throw Error(ErrorKind::kDeltaTooLarge, "delta must be < 1/2");
  }
  if (!(delta > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta must be > 0");
  }
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw Error(ErrorKind::kInvalidArgument, "eps must be finite and >= 0");
  }
  if (!(delta0 > 0.0 && delta0 < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "delta0 must lie in (0, 1)");
  }
  if (n < 1) {
    throw Error(ErrorKind::kInvalidArgument, "n must be >= 1");
  }
  CompositionReport report;
  report.n = n;
  report.eps = eps;
  report.delta = delta;
  report.delta0 = delta0;
  report.eps_com = eps * std::sqrt(2.0 * n * std::log(1.0 / delta0)) +
                   n * eps * std::expm1(eps);
  report.delta_prime = n * delta + delta0;
  return report;
}

double GaussianEpsClosedForm(double ratio, double delta) {
  if (!(ratio >= 0.0) || !(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "need ratio >= 0 and delta in (0, 1)");
  }
  return 0.5 * ratio * ratio + ratio * std::sqrt(2.0 * std::log(1.0 / delta));
}

CompositionReport CompareGaussianComposition(double ratio, double delta, int n,
                                             double delta0) {
  if (delta >= 0.5) {
    throw Error(ErrorKind::kDeltaTooLarge, "delta must be < 1/2");
  }
  CompositionReport report =
      AdvancedComposition(GaussianEpsClosedForm(ratio, delta), delta, n,
                          delta0);
  report.ratio = ratio;
  const double log_term = std::max(0.0, std::log(1.0 / report.delta_prime));
  report.eps_rdp = 0.5 * n * ratio * ratio +
                   ratio * std::sqrt(2.0 * n * log_term);
  report.holds = *report.eps_rdp <= report.eps_com;
  return report;
}

nlohmann::json CompositionReportToJson(const CompositionReport& report) {
  nlohmann::json out = {{"n", report.n},
                        {"eps", report.eps},
                        {"delta", report.delta},
                        {"delta0", report.delta0},
                        {"eps_com", report.eps_com},
                        {"delta_prime", report.delta_prime}};
  if (report.ratio) out["ratio"] = *report.ratio;
  if (report.eps_rdp) out["eps_rdp"] = *report.eps_rdp;
  if (report.holds) out["holds"] = *report.holds;
  return out;
}

}  // namespace dpmerge
