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

#include <cstdint>
#include <span>
#include <string>

namespace slowmo {

enum class BaseOptimizerKind { kPlainSgd, kSgdNesterov, kAdam };
enum class BufferStrategy { kReset, kMaintain, kAverage };

std::string to_string(BaseOptimizerKind kind);
std::string to_string(BufferStrategy strategy);
BaseOptimizerKind parse_base_optimizer_kind(const std::string& name);
BufferStrategy parse_buffer_strategy(const std::string& name);

struct BaseOptimizerConfig {
  BaseOptimizerKind kind = BaseOptimizerKind::kPlainSgd;
  double momentum = 0.9;  // beta_local for sgd-nesterov
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  BufferStrategy buffer_strategy = BufferStrategy::kReset;

  /// Throws ConfigError for factors outside [0, 1) or eps <= 0.
  void validate() const;
};

/// Worker-private optimiser state. `step` is the bias-correction index l: the
/// number of updates taken since the last reset, so the first update uses l = 1.
struct OptimizerBuffers {
  ParameterVector h;  // first moment / momentum
  ParameterVector v;  // second moment (adam)
  std::uint64_t step = 0;

  static OptimizerBuffers zeros(Eigen::Index dimension) {
    return {ParameterVector::Zero(dimension), ParameterVector::Zero(dimension), 0};
  }
};

/// Update direction d for one base step; the caller applies x <- x - gamma * d.
/// Advances `buffers` in place.
ParameterVector local_direction(const BaseOptimizerConfig& config, OptimizerBuffers& buffers,
                                const ParameterVector& gradient);

/// Start-of-outer-iteration handling of every worker's buffers.
void apply_buffer_strategy(const BaseOptimizerConfig& config, std::span<OptimizerBuffers> buffers);

}  // namespace slowmo
