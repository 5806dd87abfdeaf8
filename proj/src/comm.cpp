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

#include "slowmo/comm.hpp"

#include <algorithm>
#include <cmath>

namespace slowmo {

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kAllReduce: return "allreduce";
    case ProtocolKind::kLocal: return "local";
    case ProtocolKind::kDpsgd: return "dpsgd";
    case ProtocolKind::kSgp: return "sgp";
    case ProtocolKind::kOsgp: return "osgp";
    case ProtocolKind::kDoubleAverage: return "double-average";
  }
  return "?";
}

ProtocolKind parse_protocol_kind(const std::string& name) {
  if (name == "allreduce") return ProtocolKind::kAllReduce;
  if (name == "local") return ProtocolKind::kLocal;
  if (name == "dpsgd") return ProtocolKind::kDpsgd;
  if (name == "sgp") return ProtocolKind::kSgp;
  if (name == "osgp") return ProtocolKind::kOsgp;
  if (name == "double-average") return ProtocolKind::kDoubleAverage;
  throw ConfigError("unknown protocol '" + name + "'");
}

void MessageQueues::enqueue(InFlightMessage message, std::uint64_t delay) {
  if (!(message.payload_w > 0.0)) throw ProtocolError("push-sum message with non-positive weight");
  if (message.sender >= workers_ || message.receiver >= workers_) throw ProtocolError("message to unknown worker");
  const auto edge = std::make_pair(message.sender, message.receiver);
  std::uint64_t deliver = message.send_round + delay;
  if (auto it = last_delivery_.find(edge); it != last_delivery_.end()) deliver = std::max(deliver, it->second);
  message.deliver_round = deliver;
  last_delivery_[edge] = deliver;
  edges_[edge].push_back(std::move(message));
}

Deliveries MessageQueues::collect(std::uint64_t round, bool everything) {
  Deliveries out(workers_);
  for (auto& [edge, queue] : edges_) {
    while (!queue.empty() && (everything || queue.front().deliver_round <= round)) {
      out[edge.second].push_back(std::move(queue.front()));
      queue.pop_front();
    }
  }
  for (auto& inbox : out) {
    std::stable_sort(inbox.begin(), inbox.end(), [](const InFlightMessage& a, const InFlightMessage& b) {
      return a.send_round != b.send_round ? a.send_round < b.send_round : a.sender < b.sender;
    });
  }
  return out;
}

Deliveries MessageQueues::deliver(std::uint64_t round) { return collect(round, false); }

Deliveries MessageQueues::drain_all() { return collect(0, true); }

std::size_t MessageQueues::in_flight() const {
  std::size_t n = 0;
  for (const auto& [edge, queue] : edges_) n += queue.size();
  return n;
}

double MessageQueues::in_flight_weight() const {
  double total = 0.0;
  for (const auto& [edge, queue] : edges_)
    for (const auto& msg : queue) total += msg.payload_w;
  return total;
}

ParameterVector MessageQueues::in_flight_sum(Eigen::Index dimension) const {
  ParameterVector total = ParameterVector::Zero(dimension);
  for (const auto& [edge, queue] : edges_)
    for (const auto& msg : queue) total += msg.payload_x;
  return total;
}

ParameterVector exact_average(std::span<const WorkerState> states) {
  std::vector<ParameterVector> z;
  z.reserve(states.size());
  for (const auto& s : states) z.push_back(s.z);
  return exact_average<double>(std::span<const ParameterVector>(z));
}

namespace {

void check_mixing(const MixingMatrix& mixing, std::size_t workers, std::size_t half_steps) {
  const auto m = static_cast<Eigen::Index>(workers);
  if (mixing.weights.rows() != m || mixing.weights.cols() != m || half_steps != workers)
    throw ProtocolError("mixing matrix / state count mismatch");
}

// x_i <- sum_j p(i, j) half_j, summed over nonzero weights in ascending sender order.
std::vector<ParameterVector> mix(const Matrix& p, std::span<const ParameterVector> half_step) {
  const auto m = p.rows();
  std::vector<ParameterVector> out;
  out.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    ParameterVector acc = ParameterVector::Zero(half_step.front().size());
    for (Eigen::Index j = 0; j < m; ++j) {
      if (p(i, j) != 0.0) acc += p(i, j) * half_step[static_cast<std::size_t>(j)];
    }
    out.push_back(std::move(acc));
  }
  return out;
}

}  // namespace

void gossip_round(std::span<WorkerState> states, const MixingMatrix& mixing, std::span<const ParameterVector> half_step) {
  check_mixing(mixing, states.size(), half_step.size());
  if (!is_doubly_stochastic(mixing.weights)) throw ProtocolError("gossip_round requires a doubly-stochastic mixing matrix");
  auto mixed = mix(mixing.weights, half_step);
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].x = std::move(mixed[i]);
    states[i].z = states[i].x;
    states[i].w = 1.0;
  }
}

void pushsum_round(std::span<WorkerState> states, const MixingMatrix& mixing, std::span<const ParameterVector> half_step) {
  check_mixing(mixing, states.size(), half_step.size());
  if (!is_column_stochastic(mixing.weights)) throw ProtocolError("pushsum_round requires a column-stochastic mixing matrix");
  auto mixed = mix(mixing.weights, half_step);
  const Matrix& p = mixing.weights;
  std::vector<double> weights(states.size(), 0.0);
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      const double pij = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (pij != 0.0) weights[i] += pij * states[j].w;
    }
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!(weights[i] > 0.0)) throw ProtocolError("push-sum weight collapsed to zero at worker " + std::to_string(i));
    states[i].x = std::move(mixed[i]);
    states[i].w = weights[i];
    states[i].z = states[i].x / states[i].w;
  }
}

std::uint64_t DelayModel::draw(RngStream& stream) const {
  if (kind == Kind::kFixed) return delay;
  // Number of failed trials before the first success, capped.
  std::uint64_t d = 0;
  while (d < cap && stream.uniform() >= success) ++d;
  return d;
}

void osgp_send(WorkerState& state, WorkerId worker, const ParameterVector& half_step, const MixingMatrix& mixing,
               std::uint64_t round, const OsgpConfig& config, RngStream& delay_stream, MessageQueues& queues) {
  const Matrix& p = mixing.weights;
  const auto col = static_cast<Eigen::Index>(worker);
  if (std::abs(p.col(col).sum() - 1.0) > 1e-12) throw ProtocolError("osgp requires column-stochastic mixing");
  const double self_share = p(col, col);
  if (!(self_share > 0.0)) throw ProtocolError("osgp requires a positive self weight");

  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (i == col || p(i, col) == 0.0) continue;
    InFlightMessage msg{p(i, col) * half_step, p(i, col) * state.w, worker, static_cast<WorkerId>(i), round, round};
    queues.enqueue(std::move(msg), config.delay.draw(delay_stream));
  }
  state.x = self_share * half_step;
  state.w = self_share * state.w;
  state.z = state.x / state.w;
  ++state.local_round;

  if (state.count_since_last >= config.staleness) {
    state.awaiting = true;
  } else {
    ++state.count_since_last;
  }
}

void osgp_receive(WorkerState& state, std::span<const InFlightMessage> delivered) {
  if (delivered.empty()) return;
  for (const auto& msg : delivered) {
    state.x += msg.payload_x;
    state.w += msg.payload_w;
  }
  if (!(state.w > 0.0)) throw InternalError("osgp weight is not positive");
  state.z = state.x / state.w;
  state.count_since_last = 0;
  state.awaiting = false;
}

void double_average(std::span<WorkerState> states) {
  if (states.empty()) return;
  std::vector<ParameterVector> xs, hs;
  for (const auto& s : states) {
    xs.push_back(s.x);
    hs.push_back(s.buffers.h);
  }
  const ParameterVector x = exact_average<double>(std::span<const ParameterVector>(xs));
  const ParameterVector h = exact_average<double>(std::span<const ParameterVector>(hs));
  for (auto& s : states) {
    s.x = x;
    s.z = x;
    s.w = 1.0;
    s.buffers.h = h;
  }
}

double total_weight(std::span<const WorkerState> states, const MessageQueues& queues) {
  double total = 0.0;
  for (const auto& s : states) total += s.w;
  return total + queues.in_flight_weight();
}

}  // namespace slowmo
