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

#include "slowmo/config.hpp"
#include "slowmo/slowmo.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace slowmo {

/// State before base step (t, k). x_bar is the exact worker-average of z.
struct StepRecord {
  std::uint64_t t = 0;
  std::uint64_t k = 0;
  std::uint64_t round = 0;
  double gamma = 0.0;
  double loss = 0.0;            // f(x_bar)
  double grad_norm_sq = 0.0;    // ||grad f(x_bar)||^2
  double consensus = 0.0;       // (1/m) sum_i ||z_i - x_bar||^2
  double weight_mass = 0.0;     // sum of w over workers and messages in flight
  double bias_sq = 0.0;         // ||grad f(x_bar) - E[d_bar]||^2
  std::uint64_t stalled = 0;    // workers blocked this round
  ParameterVector x_bar;
  ParameterVector d_bar;        // mean direction applied in this step
};

struct OuterRecord {
  std::uint64_t t = 0;
  std::uint64_t inner_steps = 0;
  bool partial = false;
  double gamma = 0.0;
  ParameterVector x_outer;  // worker 0's x_{t+1,0}
  ParameterVector u;        // worker 0's slow buffer after the update
};

struct TraceMeta {
  std::uint64_t workers = 0;
  std::uint64_t dimension = 0;
  std::uint64_t tau = 0;
  std::uint64_t outer_iterations = 0;
  std::uint64_t total_steps = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::string protocol;
  std::string base;
  bool noaverage = false;
  std::uint64_t seed = 0;
  double initial_loss = 0.0;  // f(x0)
};

struct MetricsTrace {
  TraceMeta meta;
  std::vector<StepRecord> steps;
  std::vector<OuterRecord> outer;
  CommCounters counters;
  std::uint64_t undelivered = 0;  // messages still queued after the final drain
};

/// Raised by run() on a NaN/Inf; carries everything recorded up to the failure.
class AbortedRun : public NumericalError {
 public:
  AbortedRun(const std::string& what, MetricsTrace partial) : NumericalError(what), partial_(std::move(partial)) {}
  const MetricsTrace& partial() const { return partial_; }

 private:
  MetricsTrace partial_;
};

/// Executes the configured experiment. Deterministic given the config.
MetricsTrace run(const ExperimentConfig& config);

/// Same as run() on an already built problem (lets callers reuse one problem across seeds).
MetricsTrace run(const ExperimentConfig& config, const Problem& problem);

/// Delivers every message with deliver_round <= round, ordered by (send_round, sender).
Deliveries deliver_messages(MessageQueues& queues, std::uint64_t round);

}  // namespace slowmo
