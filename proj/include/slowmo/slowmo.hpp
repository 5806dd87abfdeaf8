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
#include "slowmo/common.hpp"
#include "slowmo/numerics.hpp"
#include "slowmo/rng.hpp"
#include "slowmo/topology.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace slowmo {

/// Fast learning rate as a function of the outer iteration t. Sampled once per
/// outer iteration, so gamma never changes inside a block.
struct GammaSchedule {
  enum class Kind { kConstant, kStep, kTheory };
  Kind kind = Kind::kConstant;
  double value = 0.1;
  double decay = 0.1;                       // step: multiplier applied at each milestone
  std::vector<std::uint64_t> milestones;    // step: outer iterations where decay applies
  std::uint64_t warmup = 0;                 // linear warm-up over the first outer iterations

  double at(std::uint64_t t) const;
};

std::string to_string(GammaSchedule::Kind kind);
GammaSchedule::Kind parse_gamma_kind(const std::string& name);

struct SlowMoHyper {
  double alpha = 1.0;
  double beta = 0.5;
  std::uint64_t tau = 12;
  GammaSchedule gamma;
  bool noaverage = false;
};

/// One worker's copy of the outer-loop state. Without noaverage every copy is identical.
struct SlowMoState {
  ParameterVector x_outer;  // x_{t,0}
  ParameterVector u;        // slow momentum buffer
  std::uint64_t t = 0;
};

template <typename Scalar>
struct SlowStep {
  VectorX<Scalar> u_next;
  VectorX<Scalar> x_next;
};

/// u' = beta u + (x_t0 - x_ttau) / gamma;  x' = x_t0 - alpha gamma u'.
template <typename Scalar>
SlowStep<Scalar> slow_update(const VectorX<Scalar>& x_t0, const VectorX<Scalar>& x_ttau, const VectorX<Scalar>& u,
                             Scalar gamma, Scalar alpha, Scalar beta) {
  if (!(gamma > Scalar(0))) throw ConfigError("slow_update: gamma must be positive");
  require_same_dimension(x_t0.size(), x_ttau.size(), "slow_update");
  require_same_dimension(x_t0.size(), u.size(), "slow_update");
  SlowStep<Scalar> out;
  out.u_next = beta * u + (x_t0 - x_ttau) / gamma;
  out.x_next = x_t0 - (alpha * gamma) * out.u_next;
  return out;
}

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::kAllReduce;
  OsgpConfig osgp;
  std::uint64_t double_average_period = 1;  // base steps between double-averaging rounds
};

struct CommCounters {
  std::uint64_t exact_averages = 0;       // outer-loop averaging
  std::uint64_t gradient_allreduces = 0;  // per-step gradient averaging of the allreduce base
  std::uint64_t gossip_messages = 0;
  std::uint64_t pushsum_messages = 0;
  std::uint64_t double_averages = 0;
  std::uint64_t drain_barriers = 0;
};

/// Everything a simulated cluster owns: worker states, slow-state copies, private
/// random streams and the message queues.
struct Cluster {
  std::vector<WorkerState> workers;
  std::vector<SlowMoState> slow;
  std::vector<RngStream> gradient_streams;
  std::vector<RngStream> delay_streams;
  MessageQueues queues;
  CommCounters counters;
  std::uint64_t round = 0;  // global base-step counter
  std::uint64_t outer = 0;  // completed outer iterations

  static Cluster start(const ParameterVector& x0, std::size_t workers, std::uint64_t seed);
};

struct RunContext {
  const Problem& problem;
  const TopologySchedule& topology;
  BaseOptimizerConfig base;
  ProtocolConfig protocol;
  SlowMoHyper hyper;
  double weight_decay = 0.0;
  bool parallel = false;
  unsigned threads = 0;
};

struct StepInfo {
  std::uint64_t t = 0;
  std::uint64_t k = 0;
  std::uint64_t round = 0;
  double gamma = 0.0;
};

struct StepHooks {
  std::function<void(const StepInfo&, const Cluster&)> before;
  /// Receives the worker-mean of the directions d applied this step.
  std::function<void(const StepInfo&, const Cluster&, const ParameterVector&)> after;
};

struct OuterResult {
  std::uint64_t t = 0;
  std::uint64_t inner_steps = 0;
  bool partial = false;
  double gamma = 0.0;
};

/// Throws ConfigError for incompatible protocol/base/topology combinations.
void validate(const RunContext& ctx);

/// One outer iteration: buffer strategy, `inner_steps` base steps with protocol
/// communication, the exact average (skipped under noaverage) and the slow update.
OuterResult run_outer_iteration(Cluster& cluster, const RunContext& ctx, std::uint64_t inner_steps,
                                const StepHooks& hooks = {});

/// Drain barrier: delivers every in-flight message and clears blocking state.
void drain_barrier(Cluster& cluster);

/// Worker-mean of the directions each worker would take with noise-free gradients
/// (the conditional expectation for plain-sgd and sgd-nesterov bases).
ParameterVector expected_mean_direction(const Cluster& cluster, const RunContext& ctx);

}  // namespace slowmo
