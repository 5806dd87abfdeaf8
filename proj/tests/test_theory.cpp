// Copyright 2026 The SlowMo Simulator Authors
// SPDX-License-Identifier: Apache-2.0
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

#include "slowmo/theory.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace slowmo;
using namespace slowmo::testing;

namespace {

BoundInputs baseline() {
  BoundInputs in;
  in.delta = 1.0;
  in.m = 1;
  in.tau = 1;
  in.T = 100;
  in.L = 1.0;
  in.V = 1.0;
  in.beta = 0.0;
  in.alpha = 1.0;
  return in;
}

Problem additive_problem(std::size_t m, std::size_t d, double sigma) {
  ProblemSpec spec;
  spec.dimension = d;
  spec.noise.sigma = sigma;
  spec.quadratic.target_spread = 0.3;
  return make_problem(spec, m);
}

}  // namespace

TEST(Rhs, ArSgdExample) { EXPECT_NEAR(theorem1_rhs(baseline()), 0.3, 1e-15); }

TEST(Rhs, MomentumTermsVanish) {
  auto in = baseline();
  in.tau = 12;
  in.T = 50;
  in.m = 4;
  // With beta = 0 and alpha = 1 only the leading term remains.
  const double lead = (2.0 * in.delta + 4.0 * in.V * in.L) / std::sqrt(4.0 * 600.0);
  EXPECT_DOUBLE_EQ(theorem1_rhs(in), lead);

  // tau = 1 kills the drift term for any alpha, beta; the beta term is checked by hand.
  auto one = baseline();
  one.alpha = 0.3;
  one.beta = 0.5;
  const double beta_term = 8.0 * 1.0 * 1.0 * 1.0 / 100.0 * 0.25 / 0.75;
  EXPECT_NEAR(theorem1_rhs(one), 0.3 + beta_term, 1e-15);
}

TEST(Rhs, FullFormulaByHand) {
  BoundInputs in{2.0, 3, 4, 25, 1.5, 0.2, 0.6, 0.5, 0.01};
  const double mvl = 3 * 0.2 * 1.5;
  const double expect = (2 * 2.0 + mvl) / std::sqrt(3.0 * 100.0) + 0.01 +
                        4 * mvl * 1.5 * 3 / 100.0 * std::pow(0.4 / 0.5 - 1, 2) +
                        8 * mvl * 1.5 * 4 / 100.0 * 0.36 / (1 - 0.36);
  EXPECT_NEAR(theorem1_rhs(in), expect, 1e-14);
}

TEST(Rhs, BetaOneRejected) {
  auto in = baseline();
  in.beta = 1.0;
  EXPECT_THROW(theorem1_rhs(in), ConfigError);
  in.beta = -0.1;
  EXPECT_THROW(theorem1_rhs(in), ConfigError);
}

TEST(Rhs, IncreasingInBeta) {
  auto in = baseline();
  in.tau = 1;  // isolates the beta^2 / (1 - beta^2) term
  double prev = -1.0;
  for (int i = 0; i <= 99; ++i) {
    in.beta = 0.01 * i;
    const double r = theorem1_rhs(in);
    EXPECT_GT(r, prev - 1e-15);
    prev = r;
  }
}

TEST(StepCondition, Examples) {
  EXPECT_NEAR(step_count_condition(1, 1.0, 7, 1.0, 0.0), 1.0 + std::sqrt(3.0), 1e-12);
  // 4 tau beta / (1 - beta) = 40 here, so the middle branch wins.
  EXPECT_NEAR(step_count_condition(4, 2.0, 10, 1.0, 0.5), 16.0 * (1.0 + 40.0 * std::sqrt(3.0)), 1e-9);
  EXPECT_NEAR(step_count_condition(4, 2.0, 10, 1.0, 0.5), 1124.51, 0.01);
  EXPECT_DOUBLE_EQ(step_count_condition(2, 1.3, 5, 0.5, 0.2), 2.0 * step_count_condition(1, 1.3, 5, 0.5, 0.2));
  // alpha below 1 - beta makes the first branch active.
  EXPECT_NEAR(step_count_condition(1, 1.0, 2, 0.25, 0.0), 1.0 + std::sqrt(3.0) * 18.0, 1e-12);
  EXPECT_THROW(step_count_condition(1, 1.0, 1, 1.0, 1.0), ConfigError);
}

TEST(Surrogate, Formula) {
  EXPECT_DOUBLE_EQ(local_sgd_bias_bound(0.1, 2.0, 1.0, 0.5, 3), 3 * 0.04 * 1.0 * 3 + 9 * 0.04 * 0.5 * 9);
}

TEST(EstimateV, NoiselessIsZero) {
  const auto p = additive_problem(3, 4, 0.0);
  BaseOptimizerConfig base;
  base.kind = BaseOptimizerKind::kSgdNesterov;
  const auto v = estimate_V(p, base, ProtocolKind::kLocal, 200, ParameterVector::Ones(4));
  EXPECT_EQ(v.value, 0.0);
}

TEST(EstimateV, PlainSgdMatchesSigmaSquaredOverM) {
  BaseOptimizerConfig base;
  base.kind = BaseOptimizerKind::kPlainSgd;
  for (std::size_t m : {1, 4}) {
    const auto p = additive_problem(m, 5, 1.0);
    const auto v = estimate_V(p, base, ProtocolKind::kLocal, 100000, ParameterVector::Zero(5), 3);
    EXPECT_EQ(v.samples, 100000u);
    EXPECT_LT(std::abs(v.value - 1.0 / m), 3.0 * v.std_error) << m;
  }
}

TEST(EstimateV, RefusesFewSamples) {
  const auto p = additive_problem(2, 2, 1.0);
  EXPECT_THROW(estimate_V(p, {}, ProtocolKind::kLocal, 99, ParameterVector::Zero(2)), ConfigError);
  EXPECT_THROW(estimate_V(p, {}, ProtocolKind::kLocal, 100, ParameterVector::Zero(3)), ConfigError);
}

TEST(CheckBound, ArSgdDeterministicHolds) {
  const std::size_t m = 1, d = 4;
  auto raw = quadratic_config(m, d, 0.0);
  raw["protocol"] = "allreduce";
  raw["slowmo"] = {{"alpha", 1.0}, {"beta", 0.0}, {"tau", 1}, {"gamma", {{"schedule", "theory"}}}};
  const auto cfg_probe = parse_config(raw);
  const Problem problem = make_problem(cfg_probe.problem, m);
  const auto pc = problem_constants(problem, ParameterVector::Ones(d));
  const BoundConstants k{pc.f_inf, pc.L, 0.0, 0.0, pc.zeta2, false};
  for (std::uint64_t T : {10, 100, 400}) {
    raw["outer_iterations"] = T;
    const auto trace = run(parse_config(raw), problem);
    const std::vector<MetricsTrace> one{trace};
    const auto report = check_bound(one, k);
    EXPECT_EQ(report.status, "holds") << T;
    EXPECT_LE(report.lhs, report.rhs);
    EXPECT_EQ(report.bias, 0.0);
    EXPECT_NEAR(report.gamma_eff, std::sqrt(1.0 / T), 1e-12);
  }
}

TEST(CheckBound, BiasZeroForAllReduceWithIdenticalWorkers) {
  auto raw = quadratic_config(4, 3, 0.0);
  raw["problem"]["quadratic"]["target_spread"] = 0.0;
  raw["protocol"] = "allreduce";
  raw["problem"]["noise"]["sigma"] = 1.0;
  const auto trace = run_raw(raw);
  for (const auto& r : trace.steps) EXPECT_LT(r.bias_sq, 1e-28);
}

TEST(CheckBound, ConditionNotMetCases) {
  auto raw = quadratic_config(2, 3, 1.0);
  raw["metrics"] = {{"cadence", 2}};
  const std::vector<MetricsTrace> sparse{run_raw(raw)};
  const BoundConstants k{0.0, 1.0, 0.5, 1.0, 0.0, false};
  auto r = check_bound(sparse, k);
  EXPECT_EQ(r.status, "condition-not-met");
  EXPECT_FALSE(r.holds);

  raw.erase("metrics");
  const std::vector<MetricsTrace> few{run_raw(raw)};
  r = check_bound(few, k);
  EXPECT_EQ(r.status, "condition-not-met");  // gamma off prescription, too few steps and seeds
  EXPECT_GE(r.notes.size(), 3u);
  EXPECT_EQ(r.bias_source, "local-sgd-surrogate");

  const std::vector<MetricsTrace> none;
  EXPECT_THROW(check_bound(none, k), ConfigError);
}

TEST(CheckBound, RejectsMixedExperiments) {
  auto raw = quadratic_config(2, 3, 0.0);
  const auto a = run_raw(raw);
  raw["slowmo"]["tau"] = 2;
  const std::vector<MetricsTrace> mixed{a, run_raw(raw)};
  EXPECT_THROW(check_bound(mixed, {}), ConfigError);
}

TEST(Constants, JsonRoundTrip) {
  ProblemConstants pc;
  pc.L = 2.0;
  pc.sigma2 = 0.5;
  pc.zeta2 = 0.25;
  pc.f_inf = -1.0;
  const auto k = bound_constants_from_json(to_json(pc, 0.125));
  EXPECT_EQ(k.L, 2.0);
  EXPECT_EQ(k.V, 0.125);
  EXPECT_EQ(k.f_inf, -1.0);
  EXPECT_TRUE(k.estimated);
  EXPECT_THROW(bound_constants_from_json({{"L", 1.0}}), ConfigError);
}
