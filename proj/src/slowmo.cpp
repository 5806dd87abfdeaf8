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

#include "slowmo/slowmo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

namespace slowmo {

double GammaSchedule::at(std::uint64_t t) const {
  double g = value;
  if (kind == Kind::kStep) {
    for (auto milestone : milestones)
      if (t >= milestone) g *= decay;
  }
  if (warmup > 0 && t < warmup) g *= static_cast<double>(t + 1) / static_cast<double>(warmup);
  return g;
}

std::string to_string(GammaSchedule::Kind kind) {
  switch (kind) {
    case GammaSchedule::Kind::kConstant: return "constant";
    case GammaSchedule::Kind::kStep: return "step";
    case GammaSchedule::Kind::kTheory: return "theory";
  }
  return "?";
}

GammaSchedule::Kind parse_gamma_kind(const std::string& name) {
  if (name == "constant") return GammaSchedule::Kind::kConstant;
  if (name == "step") return GammaSchedule::Kind::kStep;
  if (name == "theory") return GammaSchedule::Kind::kTheory;
  throw ConfigError("unknown gamma schedule '" + name + "'");
}

Cluster Cluster::start(const ParameterVector& x0, std::size_t workers, std::uint64_t seed) {
  if (workers == 0) throw ConfigError("at least one worker is required");
  Cluster c;
  c.queues = MessageQueues(workers);
  for (std::size_t i = 0; i < workers; ++i) {
    c.workers.push_back(WorkerState::at(x0));
    c.slow.push_back({x0, ParameterVector::Zero(x0.size()), 0});
    c.gradient_streams.emplace_back(seed, StreamPurpose::kGradient, i);
    c.delay_streams.emplace_back(seed, StreamPurpose::kDelay, i);
  }
  return c;
}

namespace {

// Runs fn(i) for every worker. Each call touches only worker i's state and stream,
// so the threaded path gives the same bits as the sequential one.
template <typename Fn>
void for_each_worker(std::size_t m, bool parallel, unsigned threads, Fn&& fn) {
  if (!parallel || m < 2) {
    for (std::size_t i = 0; i < m; ++i) fn(i);
    return;
  }
  unsigned n = threads != 0 ? threads : std::max(2u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, m));
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    for (unsigned c = 0; c < n; ++c) {
      pool.emplace_back([&, c] {
        try {
          for (std::size_t i = c; i < m; i += n) fn(i);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

const ParameterVector& evaluation_point(const WorkerState& s, ProtocolKind kind) {
  return is_push_sum(kind) ? s.z : s.x;
}

std::uint64_t off_diagonal_nonzeros(const Matrix& p) {
  std::uint64_t n = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      if (i != j && p(i, j) != 0.0) ++n;
  return n;
}

void replace_parameters(std::vector<WorkerState>& workers, std::vector<ParameterVector>& half) {
  for (std::size_t i = 0; i < workers.size(); ++i) {
    workers[i].x = std::move(half[i]);
    workers[i].z = workers[i].x;
  }
}

// One base step on every worker followed by the protocol's communication.
// Returns the mean of the directions actually applied.
ParameterVector inner_step(Cluster& cluster, const RunContext& ctx, const StepInfo& info) {
  const std::size_t m = cluster.workers.size();
  const ProtocolKind kind = ctx.protocol.kind;
  auto& workers = cluster.workers;
  const auto d = workers.front().x.size();

  std::vector<char> active(m, 1);
  if (kind == ProtocolKind::kOsgp)
    for (std::size_t i = 0; i < m; ++i) active[i] = workers[i].awaiting ? 0 : 1;

  std::vector<ParameterVector> grads(m);
  for_each_worker(m, ctx.parallel, ctx.threads, [&](std::size_t i) {
    if (!active[i]) return;
    const ParameterVector& point = evaluation_point(workers[i], kind);
    ParameterVector g = worker_stochastic_gradient(ctx.problem, i, point, cluster.gradient_streams[i]);
    if (ctx.weight_decay != 0.0) g += ctx.weight_decay * point;
    grads[i] = std::move(g);
  });

  std::vector<ParameterVector> dirs(m);
  if (kind == ProtocolKind::kAllReduce) {
    const ParameterVector mean_grad = exact_average<double>(std::span<const ParameterVector>(grads));
    ++cluster.counters.gradient_allreduces;
    for_each_worker(m, ctx.parallel, ctx.threads,
                    [&](std::size_t i) { dirs[i] = local_direction(ctx.base, workers[i].buffers, mean_grad); });
  } else {
    for_each_worker(m, ctx.parallel, ctx.threads, [&](std::size_t i) {
      if (active[i]) dirs[i] = local_direction(ctx.base, workers[i].buffers, grads[i]);
    });
  }

  std::vector<ParameterVector> half(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!active[i]) continue;
    half[i] = workers[i].x - info.gamma * dirs[i];
    if (!half[i].allFinite()) {
      throw NumericalError("non-finite parameters at outer iteration " + std::to_string(info.t) + ", inner step " +
                           std::to_string(info.k) + ", worker " + std::to_string(i));
    }
  }

  switch (kind) {
    case ProtocolKind::kAllReduce:
    case ProtocolKind::kLocal:
      replace_parameters(workers, half);
      break;
    case ProtocolKind::kDoubleAverage:
      replace_parameters(workers, half);
      if ((info.k + 1) % ctx.protocol.double_average_period == 0) {
        double_average(workers);
        ++cluster.counters.double_averages;
      }
      break;
    case ProtocolKind::kDpsgd: {
      const MixingMatrix mix = mixing_matrix(ctx.topology, info.round, Stochasticity::kDoubly);
      gossip_round(workers, mix, half);
      cluster.counters.gossip_messages += off_diagonal_nonzeros(mix.weights);
      break;
    }
    case ProtocolKind::kSgp: {
      const MixingMatrix mix = mixing_matrix(ctx.topology, info.round, Stochasticity::kColumn);
      pushsum_round(workers, mix, half);
      cluster.counters.pushsum_messages += off_diagonal_nonzeros(mix.weights);
      break;
    }
    case ProtocolKind::kOsgp: {
      for (std::size_t i = 0; i < m; ++i) {
        if (!active[i]) continue;
        const MixingMatrix mix = mixing_matrix(ctx.topology, workers[i].local_round, Stochasticity::kColumn);
        const std::size_t before = cluster.queues.in_flight();
        osgp_send(workers[i], i, half[i], mix, info.round, ctx.protocol.osgp, cluster.delay_streams[i], cluster.queues);
        cluster.counters.pushsum_messages += cluster.queues.in_flight() - before;
      }
      const Deliveries delivered = cluster.queues.deliver(info.round);
      for (std::size_t i = 0; i < m; ++i) osgp_receive(workers[i], delivered[i]);
      const bool all_blocked =
          std::all_of(workers.begin(), workers.end(), [](const WorkerState& s) { return s.awaiting; });
      if (all_blocked && cluster.queues.empty())
        throw ProtocolError("osgp deadlock: every worker is blocked and nothing is in flight");
      break;
    }
  }

  if (is_push_sum(kind)) {
    for (std::size_t i = 0; i < m; ++i)
      if (!workers[i].z.allFinite()) throw NumericalError("non-finite de-biased parameters at worker " + std::to_string(i));
  }

  std::vector<ParameterVector> applied;
  for (std::size_t i = 0; i < m; ++i)
    if (active[i]) applied.push_back(std::move(dirs[i]));
  if (applied.empty()) return ParameterVector::Zero(d);
  return exact_average<double>(std::span<const ParameterVector>(applied));
}

void reset_blocking(std::vector<WorkerState>& workers) {
  for (auto& s : workers) {
    s.count_since_last = 0;
    s.awaiting = false;
  }
}

}  // namespace

void validate(const RunContext& ctx) {
  ctx.base.validate();
  const auto& h = ctx.hyper;
  if (h.tau == 0) throw ConfigError("slowmo.tau must be at least 1");
  if (!(h.alpha > 0.0)) throw ConfigError("slowmo.alpha must be positive");
  if (!(h.beta >= 0.0 && h.beta < 1.0)) throw ConfigError("slowmo.beta must lie in [0, 1)");
  if (!(h.gamma.value > 0.0)) throw ConfigError("slowmo.gamma must be positive");
  const std::size_t m = ctx.problem.workers();
  if (ctx.topology.workers() != m) throw ConfigError("topology size does not match the number of workers");
  switch (ctx.protocol.kind) {
    case ProtocolKind::kDoubleAverage:
      if (ctx.base.kind == BaseOptimizerKind::kAdam)
        throw ConfigError("double-average is defined for momentum bases only, not adam");
      if (ctx.protocol.double_average_period == 0) throw ConfigError("double_average_period must be at least 1");
      break;
    case ProtocolKind::kOsgp:
      if (m < 2) throw ConfigError("osgp needs at least two workers");
      if (ctx.topology.kind() == TopologyKind::kIdentity) throw ConfigError("osgp needs a topology with edges");
      break;
    case ProtocolKind::kDpsgd:
      // Fails early if the schedule has no one-peer matching.
      for (std::uint64_t r = 0; r < ctx.topology.period(); ++r) (void)mixing_matrix(ctx.topology, r, Stochasticity::kDoubly);
      break;
    default:
      break;
  }
  if (h.noaverage && !is_push_sum(ctx.protocol.kind) && ctx.protocol.kind != ProtocolKind::kDpsgd)
    throw ConfigError("noaverage needs a gossip protocol (dpsgd, sgp or osgp)");
}

void drain_barrier(Cluster& cluster) {
  const Deliveries delivered = cluster.queues.drain_all();
  for (std::size_t i = 0; i < cluster.workers.size(); ++i) osgp_receive(cluster.workers[i], delivered[i]);
  reset_blocking(cluster.workers);
  ++cluster.counters.drain_barriers;
}

OuterResult run_outer_iteration(Cluster& cluster, const RunContext& ctx, std::uint64_t inner_steps,
                                const StepHooks& hooks) {
  const std::size_t m = cluster.workers.size();
  OuterResult result;
  result.t = cluster.outer;
  result.inner_steps = inner_steps;
  result.partial = inner_steps < ctx.hyper.tau;
  result.gamma = ctx.hyper.gamma.at(cluster.outer);
  if (!(result.gamma > 0.0)) throw ConfigError("gamma must be positive at every outer iteration");

  {
    std::vector<OptimizerBuffers> buffers;
    buffers.reserve(m);
    for (auto& s : cluster.workers) buffers.push_back(std::move(s.buffers));
    apply_buffer_strategy(ctx.base, buffers);
    for (std::size_t i = 0; i < m; ++i) cluster.workers[i].buffers = std::move(buffers[i]);
  }

  for (std::uint64_t k = 0; k < inner_steps; ++k) {
    const StepInfo info{cluster.outer, k, cluster.round, result.gamma};
    if (hooks.before) hooks.before(info, cluster);
    const ParameterVector mean_direction = inner_step(cluster, ctx, info);
    if (hooks.after) hooks.after(info, cluster, mean_direction);
    ++cluster.round;
  }

  const double alpha = ctx.hyper.alpha;
  const double beta = ctx.hyper.beta;
  if (!ctx.hyper.noaverage) {
    if (ctx.protocol.kind == ProtocolKind::kOsgp) drain_barrier(cluster);
    const ParameterVector x_ttau = exact_average(std::span<const WorkerState>(cluster.workers));
    ++cluster.counters.exact_averages;
    for (std::size_t i = 0; i < m; ++i) {
      auto& slow = cluster.slow[i];
      auto step = slow_update<double>(slow.x_outer, x_ttau, slow.u, result.gamma, alpha, beta);
      slow.u = std::move(step.u_next);
      slow.x_outer = std::move(step.x_next);
      ++slow.t;
      auto& s = cluster.workers[i];
      s.x = slow.x_outer;
      s.z = slow.x_outer;
      s.w = 1.0;
    }
    reset_blocking(cluster.workers);
  } else {
    // Each worker applies the slow update to its own de-biased iterate; the push-sum
    // weight is left untouched so mass in flight stays consistent.
    for (std::size_t i = 0; i < m; ++i) {
      auto& slow = cluster.slow[i];
      auto& s = cluster.workers[i];
      auto step = slow_update<double>(slow.x_outer, s.z, slow.u, result.gamma, alpha, beta);
      slow.u = std::move(step.u_next);
      slow.x_outer = std::move(step.x_next);
      ++slow.t;
      s.z = slow.x_outer;
      s.x = s.w * s.z;
    }
  }
  for (const auto& s : cluster.slow)
    if (!s.x_outer.allFinite()) throw NumericalError("non-finite slow iterate at outer iteration " + std::to_string(result.t));
  ++cluster.outer;
  return result;
}

ParameterVector expected_mean_direction(const Cluster& cluster, const RunContext& ctx) {
  const std::size_t m = cluster.workers.size();
  const ProtocolKind kind = ctx.protocol.kind;
  std::vector<ParameterVector> grads(m);
  for (std::size_t i = 0; i < m; ++i) {
    const ParameterVector& point = evaluation_point(cluster.workers[i], kind);
    grads[i] = worker_full_gradient(ctx.problem, i, point);
    if (ctx.weight_decay != 0.0) grads[i] += ctx.weight_decay * point;
  }
  if (kind == ProtocolKind::kAllReduce) {
    const ParameterVector g = exact_average<double>(std::span<const ParameterVector>(grads));
    for (auto& gi : grads) gi = g;
  }
  std::vector<ParameterVector> dirs(m);
  for (std::size_t i = 0; i < m; ++i) {
    OptimizerBuffers copy = cluster.workers[i].buffers;
    dirs[i] = local_direction(ctx.base, copy, grads[i]);
  }
  return exact_average<double>(std::span<const ParameterVector>(dirs));
}

}  // namespace slowmo
