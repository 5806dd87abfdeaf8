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
#include "slowmo/common.hpp"
#include "slowmo/rng.hpp"
#include "slowmo/topology.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace slowmo {

enum class ProtocolKind { kAllReduce, kLocal, kDpsgd, kSgp, kOsgp, kDoubleAverage };

std::string to_string(ProtocolKind kind);
ProtocolKind parse_protocol_kind(const std::string& name);

/// SGP and OSGP track a push-sum weight and evaluate gradients at z = x / w.
constexpr bool is_push_sum(ProtocolKind kind) { return kind == ProtocolKind::kSgp || kind == ProtocolKind::kOsgp; }

/// Per-worker parameters and optimiser state. Outside push-sum protocols w == 1 and z == x.
struct WorkerState {
  ParameterVector x;
  ParameterVector z;
  double w = 1.0;
  OptimizerBuffers buffers;

  // Overlap push-sum bookkeeping.
  std::uint64_t local_round = 0;
  std::uint64_t count_since_last = 0;
  bool awaiting = false;  // blocked until a message is delivered

  static WorkerState at(const ParameterVector& x0) {
    return {x0, x0, 1.0, OptimizerBuffers::zeros(x0.size())};
  }
};

/// A push-sum message: (p * x_half, p * w) on the edge sender -> receiver.
struct InFlightMessage {
  ParameterVector payload_x;
  double payload_w = 0.0;
  WorkerId sender = 0;
  WorkerId receiver = 0;
  std::uint64_t send_round = 0;
  std::uint64_t deliver_round = 0;
};

using Deliveries = std::vector<std::vector<InFlightMessage>>;

/// Per-edge FIFO delay queues. A message is never scheduled before an earlier
/// message on the same edge, so delivery order equals send order per edge.
class MessageQueues {
 public:
  explicit MessageQueues(std::size_t workers = 0) : workers_(workers) {}

  /// Schedules delivery at send_round + delay, raised to keep the edge FIFO.
  void enqueue(InFlightMessage message, std::uint64_t delay);

  /// Pops every message with deliver_round <= round, grouped by receiver and
  /// ordered by (send_round, sender).
  Deliveries deliver(std::uint64_t round);
  /// Pops everything regardless of schedule (drain barrier).
  Deliveries drain_all();

  std::size_t workers() const { return workers_; }
  std::size_t in_flight() const;
  bool empty() const { return in_flight() == 0; }
  double in_flight_weight() const;
  ParameterVector in_flight_sum(Eigen::Index dimension) const;

 private:
  Deliveries collect(std::uint64_t round, bool everything);

  std::size_t workers_;
  std::map<std::pair<WorkerId, WorkerId>, std::deque<InFlightMessage>> edges_;
  std::map<std::pair<WorkerId, WorkerId>, std::uint64_t> last_delivery_;
};

/// (1/m) sum_i v_i accumulated in ascending index order. Identical inputs are
/// returned unchanged.
template <typename Scalar>
VectorX<Scalar> exact_average(std::span<const VectorX<Scalar>> values) {
  if (values.empty()) throw ProtocolError("exact_average of an empty set");
  const VectorX<Scalar>& first = values.front();
  bool identical = true;
  for (const auto& v : values) {
    require_same_dimension(v.size(), first.size(), "exact_average");
    identical = identical && v == first;
  }
  if (identical) return first;
  VectorX<Scalar> sum = first;
  for (std::size_t i = 1; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<Scalar>(values.size());
}

/// Average of the de-biased parameters z of every worker.
ParameterVector exact_average(std::span<const WorkerState> states);

/// D-PSGD: x_i <- sum_j p(i, j) half_j with a doubly-stochastic P.
void gossip_round(std::span<WorkerState> states, const MixingMatrix& mixing, std::span<const ParameterVector> half_step);

/// SGP: mixes half-step parameters and push-sum weights with a column-stochastic P, then z = x / w.
void pushsum_round(std::span<WorkerState> states, const MixingMatrix& mixing, std::span<const ParameterVector> half_step);

struct DelayModel {
  enum class Kind { kFixed, kGeometric };
  Kind kind = Kind::kFixed;
  std::uint64_t delay = 0;      // fixed delay in rounds
  double success = 0.5;         // geometric: P(delivery after each extra round)
  std::uint64_t cap = 0;        // geometric draws are capped here (the staleness bound)

  std::uint64_t draw(RngStream& stream) const;
};

struct OsgpConfig {
  DelayModel delay;
  std::uint64_t staleness = 1;  // s: rounds without a delivery before a worker blocks
};

/// OSGP send half: non-blocking sends of (p * x_half, p * w) to out-neighbours, keeps
/// the self share p(i, i) locally, then applies the staleness rule.
void osgp_send(WorkerState& state, WorkerId worker, const ParameterVector& half_step, const MixingMatrix& mixing,
               std::uint64_t round, const OsgpConfig& config, RngStream& delay_stream, MessageQueues& queues);

/// OSGP receive half: accumulates delivered payloads into x and w and recomputes z.
/// A delivery clears the staleness counter and unblocks the worker.
void osgp_receive(WorkerState& state, std::span<const InFlightMessage> delivered);

/// Synchronises x and the momentum buffer h replaced by their means.
void double_average(std::span<WorkerState> states);

/// Sum of push-sum weights over workers and in-flight messages.
double total_weight(std::span<const WorkerState> states, const MessageQueues& queues);

}  // namespace slowmo
