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

#pragma once

#include "slowmo/base_optimizers.hpp"
#include "slowmo/comm.hpp"
#include "slowmo/numerics.hpp"
#include "slowmo/simkernel.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slowmo {

struct BoundInputs {
  double delta = 0.0;  // f(x0) - f_inf
  std::uint64_t m = 1;
  std::uint64_t tau = 1;
  std::uint64_t T = 1;
  double L = 1.0;
  double V = 0.0;
  double beta = 0.0;
  double alpha = 1.0;
  double bias = 0.0;  // the base-optimizer bias term

  /// alpha gamma / (1 - beta)
  static double gamma_eff(double gamma, double alpha, double beta) { return alpha * gamma / (1.0 - beta); }
};

/// [2 delta + m V L] / sqrt(m tau T) + bias
///   + 4 m V L^2 (tau - 1) / (tau T) ((1 - beta) / alpha - 1)^2
///   + 8 m V L^2 tau / (tau T) beta^2 / (1 - beta^2)
double theorem1_rhs(const BoundInputs& in);

/// Minimum tau T: m L^2 (1 + sqrt(3) max{3 tau (1 - beta - alpha) / alpha, 4 tau beta / (1 - beta), 1}).
double step_count_condition(std::uint64_t m, double L, std::uint64_t tau, double alpha, double beta);

/// 3 gamma^2 L^2 sigma^2 tau + 9 gamma^2 L^2 zeta^2 tau^2, valid when gamma L tau <= 1/6.
double local_sgd_bias_bound(double gamma, double L, double sigma2, double zeta2, std::uint64_t tau);

struct VEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

/// Monte-Carlo estimate of E||d_bar - E[d_bar]||^2 with every worker at `x` and
/// fresh optimiser buffers. Throws ConfigError for fewer than 100 samples.
VEstimate estimate_V(const Problem& problem, const BaseOptimizerConfig& base, ProtocolKind protocol,
                     std::uint64_t samples, const ParameterVector& x, std::uint64_t seed = 0);

struct BoundConstants {
  double f_inf = 0.0;
  double L = 1.0;
  double V = 0.0;
  double sigma2 = 0.0;
  double zeta2 = 0.0;
  bool estimated = false;  // any constant came from an estimate
};

struct BoundReport {
  std::string status;  // "holds" | "violated" | "condition-not-met"
  bool holds = false;
  double lhs = 0.0;
  double lhs_std_error = 0.0;
  double rhs = 0.0;
  double bias = 0.0;
  std::string bias_source;  // "measured" | "local-sgd-surrogate"
  double gamma = 0.0;
  double gamma_eff = 0.0;
  double required_steps = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t seeds = 0;
  bool estimated_constants = false;
  std::vector<std::string> notes;
};

/// LHS = seed-average of (1 / tau T) sum ||grad f(x_bar)||^2 over every step record,
/// compared against theorem1_rhs. Preconditions that fail mark the report
/// "condition-not-met" and no verdict is given.
BoundReport check_bound(std::span<const MetricsTrace> traces, const BoundConstants& constants,
                        std::uint64_t min_seeds = 20);

nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const ProblemConstants& constants, double V);
BoundConstants bound_constants_from_json(const nlohmann::json& j);

}  // namespace slowmo
