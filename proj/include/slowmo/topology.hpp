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

#include "slowmo/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace slowmo {

enum class TopologyKind { kExponentialDirected, kRingDirected, kComplete, kIdentity, kCustom };
enum class Stochasticity { kColumn, kDoubly };

std::string to_string(TopologyKind kind);
TopologyKind parse_topology_kind(const std::string& name);

/// Rule mapping (round, worker) to out-neighbours. Periodic in the round index.
class TopologySchedule {
 public:
  static TopologySchedule exponential(std::size_t workers);
  static TopologySchedule ring(std::size_t workers);
  static TopologySchedule complete(std::size_t workers);
  static TopologySchedule identity(std::size_t workers);
  /// rounds[r][i] lists the out-neighbours of worker i at round r (mod period).
  /// Throws ConfigError unless the union over one period is strongly connected.
  static TopologySchedule custom(std::size_t workers, std::vector<std::vector<std::vector<WorkerId>>> rounds);
  /// Reads {"workers": m, "rounds": [[[out-neighbours of 0], [of 1], ...], ...]}.
  static TopologySchedule load_custom(const std::string& path);

  TopologyKind kind() const { return kind_; }
  std::size_t workers() const { return workers_; }
  std::size_t period() const { return period_; }

  /// Out-neighbours of `worker` at `round`, ascending, self excluded.
  std::vector<WorkerId> out_neighbors(WorkerId worker, std::size_t round) const;

 private:
  TopologySchedule(TopologyKind kind, std::size_t workers, std::size_t period)
      : kind_(kind), workers_(workers), period_(period) {}

  TopologyKind kind_;
  std::size_t workers_;
  std::size_t period_;
  std::vector<std::vector<std::vector<WorkerId>>> custom_;
};

/// Number of distinct hops of the exponential graph: floor(log2(m - 1)) + 1 (1 when m <= 2).
std::size_t exponential_period(std::size_t workers);

/// The single out-neighbour (i + 2^(round mod P)) mod m of the exponential graph.
WorkerId out_neighbor(const TopologySchedule& schedule, WorkerId worker, std::size_t round);

/// p(i, j) is the weight receiver i applies to sender j's message.
struct MixingMatrix {
  Matrix weights;
  Stochasticity stochasticity = Stochasticity::kColumn;
};

/// Column-stochastic: each sender splits its mass uniformly over itself and its
/// out-neighbours. Doubly-stochastic: symmetric one-peer matching with 1/2 weights.
/// Complete graphs produce the uniform matrix in both cases.
MixingMatrix mixing_matrix(const TopologySchedule& schedule, std::size_t round, Stochasticity stochasticity);

bool is_column_stochastic(const Matrix& p, double tol = 1e-12);
bool is_doubly_stochastic(const Matrix& p, double tol = 1e-12);

/// Strong connectivity of the union graph over one period.
bool strongly_connected_over_period(const TopologySchedule& schedule);

}  // namespace slowmo
