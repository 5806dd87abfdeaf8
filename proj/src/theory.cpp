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

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slowmo {

namespace {

void require_beta(double beta) {
  if (beta == 1.0) throw ConfigError("beta = 1 divides by zero in the bound");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
}

}  // namespace

double theorem1_rhs(const BoundInputs& in) {
  require_beta(in.beta);
  if (!(in.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (in.m == 0 || in.tau == 0 || in.T == 0) throw ConfigError("m, tau and T must be positive");
  if (!(in.L > 0.0) || !(in.V >= 0.0) || !(in.bias >= 0.0) || !(in.delta >= 0.0))
    throw ConfigError("bound inputs out of range");
  const double m = static_cast<double>(in.m);
  const double tau = static_cast<double>(in.tau);
  const double steps = tau * static_cast<double>(in.T);
  const double mvl = m * in.V * in.L;
  const double lead = (2.0 * in.delta + mvl) / std::sqrt(m * steps);
  const double ratio = (1.0 - in.beta) / in.alpha - 1.0;
  const double drift = 4.0 * mvl * in.L * (tau - 1.0) / steps * ratio * ratio;
  const double momentum = 8.0 * mvl * in.L * tau / steps * (in.beta * in.beta) / (1.0 - in.beta * in.beta);
  return lead + in.bias + drift + momentum;
}

double step_count_condition(std::uint64_t m, double L, std::uint64_t tau, double alpha, double beta) {
  require_beta(beta);
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  const double t = static_cast<double>(tau);
  const double worst = std::max({3.0 * t * (1.0 - beta - alpha) / alpha, 4.0 * t * beta / (1.0 - beta), 1.0});
  return static_cast<double>(m) * L * L * (1.0 + std::sqrt(3.0) * worst);
}

double local_sgd_bias_bound(double gamma, double L, double sigma2, double zeta2, std::uint64_t tau) {
  const double t = static_cast<double>(tau);
  const double g2l2 = gamma * gamma * L * L;
  return 3.0 * g2l2 * sigma2 * t + 9.0 * g2l2 * zeta2 * t * t;
}

VEstimate estimate_V(const Problem& problem, const BaseOptimizerConfig& base, ProtocolKind protocol,
                     std::uint64_t samples, const ParameterVector& x, std::uint64_t seed) {
  if (samples < 100) throw ConfigError("estimate_V needs at least 100 samples");
  if (static_cast<std::size_t>(x.size()) != problem.dimension()) throw ConfigError("estimate_V: point has the wrong dimension");
  const std::size_t m = problem.workers();
  const OptimizerBuffers fresh = OptimizerBuffers::zeros(x.size());

  auto mean_direction = [&](const std::vector<ParameterVector>& grads) {
    std::vector<ParameterVector> dirs(m);
    if (protocol == ProtocolKind::kAllReduce) {
      const ParameterVector g = exact_average<double>(std::span<const ParameterVector>(grads));
      for (auto& d : dirs) {
        OptimizerBuffers b = fresh;
        d = local_direction(base, b, g);
      }
    } else {
      for (std::size_t i = 0; i < m; ++i) {
        OptimizerBuffers b = fresh;
        dirs[i] = local_direction(base, b, grads[i]);
      }
    }
    return exact_average<double>(std::span<const ParameterVector>(dirs));
  };

  // One pass over the sample stream; replaying it gives identical draws.
  auto sweep = [&](auto&& visit) {
    std::vector<RngStream> streams;
    for (std::size_t i = 0; i < m; ++i) streams.emplace_back(seed, StreamPurpose::kEstimate, i);
    std::vector<ParameterVector> grads(m);
    for (std::uint64_t s = 0; s < samples; ++s) {
      for (std::size_t i = 0; i < m; ++i) grads[i] = worker_stochastic_gradient(problem, i, x, streams[i]);
      visit(mean_direction(grads));
    }
  };

  ParameterVector centre;
  if (base.kind == BaseOptimizerKind::kAdam) {
    // Adam is nonlinear in g, so the conditional mean comes from the samples.
    centre = ParameterVector::Zero(x.size());
    std::uint64_t n = 0;
    sweep([&](const ParameterVector& d) {
      ++n;
      centre += (d - centre) / static_cast<double>(n);
    });
  } else {
    std::vector<ParameterVector> exact(m);
    for (std::size_t i = 0; i < m; ++i) exact[i] = worker_full_gradient(problem, i, x);
    centre = mean_direction(exact);
  }

  double mean = 0.0;
  double m2 = 0.0;
  std::uint64_t n = 0;
  sweep([&](const ParameterVector& d) {
    const double v = (d - centre).squaredNorm();
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  });
  VEstimate out;
  out.value = mean;
  out.samples = n;
  out.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return out;
}

BoundReport check_bound(std::span<const MetricsTrace> traces, const BoundConstants& constants, std::uint64_t min_seeds) {
  if (traces.empty()) throw ConfigError("check_bound needs at least one trace");
  BoundReport report;
  report.seeds = traces.size();
  report.estimated_constants = constants.estimated;
  bool met = true;
  auto fail = [&](const std::string& why) {
    met = false;
    report.notes.push_back(why);
  };

  const TraceMeta& meta = traces.front().meta;
  for (const auto& tr : traces) {
    const auto& o = tr.meta;
    if (o.workers != meta.workers || o.tau != meta.tau || o.outer_iterations != meta.outer_iterations ||
        o.total_steps != meta.total_steps || o.alpha != meta.alpha || o.beta != meta.beta ||
        o.protocol != meta.protocol || o.base != meta.base || o.initial_loss != meta.initial_loss)
      throw ConfigError("traces come from different experiments");
  }

  const std::uint64_t tau_T = meta.tau * meta.outer_iterations;
  report.steps = meta.total_steps;
  if (meta.total_steps != tau_T) fail("last outer iteration is partial");

  // LHS per seed and the measured bias term.
  std::vector<double> lhs;
  double bias_sum = 0.0;
  double gamma = traces.front().steps.empty() ? 0.0 : traces.front().steps.front().gamma;
  for (const auto& tr : traces) {
    if (tr.steps.size() != meta.total_steps) {
      fail("trace does not record every base step (metrics cadence must be 1)");
      break;
    }
    double g = 0.0;
    double b = 0.0;
    for (const auto& r : tr.steps) {
      g += r.grad_norm_sq;
      b += r.bias_sq;
      if (r.gamma != gamma) gamma = std::nan("");
    }
    lhs.push_back(g / static_cast<double>(tr.steps.size()));
    bias_sum += b / static_cast<double>(tr.steps.size());
  }
  if (!lhs.empty()) {
    double mean = 0.0;
    for (double v : lhs) mean += v;
    mean /= static_cast<double>(lhs.size());
    double var = 0.0;
    for (double v : lhs) var += (v - mean) * (v - mean);
    report.lhs = mean;
    report.lhs_std_error =
        lhs.size() > 1 ? std::sqrt(var / static_cast<double>(lhs.size() - 1) / static_cast<double>(lhs.size())) : 0.0;
    report.bias = bias_sum / static_cast<double>(lhs.size());
  }
  report.bias_source = "measured";

  if (!std::isfinite(gamma)) {
    fail("gamma is not constant over the run");
    gamma = 0.0;
  }
  report.gamma = gamma;
  if (gamma > 0.0 && meta.beta < 1.0) {
    report.gamma_eff = BoundInputs::gamma_eff(gamma, meta.alpha, meta.beta);
    const double prescribed = std::sqrt(static_cast<double>(meta.workers) / static_cast<double>(tau_T));
    if (std::abs(report.gamma_eff / prescribed - 1.0) > 1e-9) {
      std::ostringstream msg;
      msg << "gamma_eff " << report.gamma_eff << " differs from sqrt(m / tau T) = " << prescribed;
      fail(msg.str());
    }
  }
  report.required_steps = step_count_condition(meta.workers, constants.L, meta.tau, meta.alpha, meta.beta);
  if (static_cast<double>(tau_T) < report.required_steps) {
    std::ostringstream msg;
    msg << "tau T = " << tau_T << " is below the required " << report.required_steps;
    fail(msg.str());
  }

  if (meta.protocol == "local" && meta.base == "plain-sgd") {
    report.bias = local_sgd_bias_bound(gamma, constants.L, constants.sigma2, constants.zeta2, meta.tau);
    report.bias_source = "local-sgd-surrogate";
    if (gamma * constants.L * static_cast<double>(meta.tau) > 1.0 / 6.0) fail("gamma L tau exceeds 1/6");
  }
  if (constants.sigma2 > 0.0 && traces.size() < min_seeds)
    fail("only " + std::to_string(traces.size()) + " seeds; at least " + std::to_string(min_seeds) + " required");
  if (constants.estimated) report.notes.push_back("estimated constants");

  BoundInputs in;
  in.delta = std::max(0.0, meta.initial_loss - constants.f_inf);
  in.m = meta.workers;
  in.tau = meta.tau;
  in.T = meta.outer_iterations;
  in.L = constants.L;
  in.V = constants.V;
  in.beta = meta.beta;
  in.alpha = meta.alpha;
  in.bias = report.bias;
  report.rhs = theorem1_rhs(in);

  if (!met) {
    report.status = "condition-not-met";
    report.holds = false;
  } else {
    report.holds = report.lhs <= report.rhs;
    report.status = report.holds ? "holds" : "violated";
  }
  return report;
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"status", r.status},
          {"holds", r.holds},
          {"lhs", r.lhs},
          {"lhs_std_error", r.lhs_std_error},
          {"rhs", r.rhs},
          {"bias", r.bias},
          {"bias_source", r.bias_source},
          {"gamma", r.gamma},
          {"gamma_eff", r.gamma_eff},
          {"required_steps", r.required_steps},
          {"steps", r.steps},
          {"seeds", r.seeds},
          {"estimated_constants", r.estimated_constants},
          {"notes", r.notes}};
}

nlohmann::json to_json(const ProblemConstants& c, double V) {
  return {{"L", c.L},
          {"sigma2", c.sigma2},
          {"zeta2", c.zeta2},
          {"f_inf", c.f_inf},
          {"V", V},
          {"exact", {{"L", c.L_exact}, {"sigma2", c.sigma2_exact}, {"zeta2", c.zeta2_exact}, {"f_inf", c.f_inf_exact}}},
          {"estimated", c.estimated()}};
}

BoundConstants bound_constants_from_json(const nlohmann::json& j) {
  BoundConstants c;
  try {
    c.L = j.at("L").get<double>();
    c.sigma2 = j.at("sigma2").get<double>();
    c.zeta2 = j.at("zeta2").get<double>();
    c.f_inf = j.at("f_inf").get<double>();
    c.V = j.at("V").get<double>();
    c.estimated = j.value("estimated", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("constants file: ") + e.what());
  }
  return c;
}

}  // namespace slowmo
