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

#include "slowmo/simkernel.hpp"

#include <algorithm>

namespace slowmo {

Deliveries deliver_messages(MessageQueues& queues, std::uint64_t round) { return queues.deliver(round); }

MetricsTrace run(const ExperimentConfig& config) {
  const Problem problem = make_problem(config.problem, config.workers);
  return run(config, problem);
}

MetricsTrace run(const ExperimentConfig& config, const Problem& problem) {
  if (problem.workers() != config.workers) throw ConfigError("problem was built for a different worker count");
  const TopologySchedule topology = make_topology(config);
  RunContext ctx{problem, topology, config.base, protocol_config(config), config.slowmo, config.weight_decay,
                 config.parallel, config.threads};
  validate(ctx);

  const ParameterVector x0 = initial_point(config, problem);
  Cluster cluster = Cluster::start(x0, config.workers, config.seed);

  MetricsTrace trace;
  auto& meta = trace.meta;
  meta.workers = config.workers;
  meta.dimension = problem.dimension();
  meta.tau = config.slowmo.tau;
  meta.outer_iterations = config.outer_iterations;
  meta.total_steps = config.total_steps;
  meta.alpha = config.slowmo.alpha;
  meta.beta = config.slowmo.beta;
  meta.protocol = to_string(config.protocol);
  meta.base = to_string(config.base.kind);
  meta.noaverage = config.slowmo.noaverage;
  meta.seed = config.seed;
  meta.initial_loss = global_loss(problem, x0);

  const auto m = static_cast<double>(config.workers);
  bool recording = false;
  StepHooks hooks;
  hooks.before = [&](const StepInfo& info, const Cluster& c) {
    recording = info.round % config.cadence == 0;
    if (!recording) return;
    StepRecord r;
    r.t = info.t;
    r.k = info.k;
    r.round = info.round;
    r.gamma = info.gamma;
    r.x_bar = exact_average(std::span<const WorkerState>(c.workers));
    r.loss = global_loss(problem, r.x_bar);
    const ParameterVector grad = global_gradient(problem, r.x_bar);
    r.grad_norm_sq = grad.squaredNorm();
    double spread = 0.0;
    for (const auto& s : c.workers) spread += (s.z - r.x_bar).squaredNorm();
    r.consensus = spread / m;
    r.weight_mass = total_weight(c.workers, c.queues);
    r.bias_sq = (grad - expected_mean_direction(c, ctx)).squaredNorm();
    r.stalled = static_cast<std::uint64_t>(
        std::count_if(c.workers.begin(), c.workers.end(), [](const WorkerState& s) { return s.awaiting; }));
    trace.steps.push_back(std::move(r));
  };
  hooks.after = [&](const StepInfo&, const Cluster&, const ParameterVector& mean_direction) {
    if (recording) trace.steps.back().d_bar = mean_direction;
  };

  try {
    std::uint64_t remaining = config.total_steps;
    for (std::uint64_t t = 0; t < config.outer_iterations && remaining > 0; ++t) {
      const std::uint64_t steps = std::min<std::uint64_t>(config.slowmo.tau, remaining);
      const OuterResult res = run_outer_iteration(cluster, ctx, steps, hooks);
      remaining -= steps;
      OuterRecord o;
      o.t = res.t;
      o.inner_steps = res.inner_steps;
      o.partial = res.partial;
      o.gamma = res.gamma;
      o.x_outer = cluster.slow.front().x_outer;
      o.u = cluster.slow.front().u;
      trace.outer.push_back(std::move(o));
    }
    if (config.protocol == ProtocolKind::kOsgp && !cluster.queues.empty()) drain_barrier(cluster);
  } catch (const NumericalError& e) {
    trace.counters = cluster.counters;
    throw AbortedRun(e.what(), std::move(trace));
  }
  trace.counters = cluster.counters;
  trace.undelivered = cluster.queues.in_flight();
  return trace;
}

}  // namespace slowmo
