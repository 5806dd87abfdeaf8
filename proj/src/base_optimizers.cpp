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

#include "slowmo/base_optimizers.hpp"

#include <cmath>

namespace slowmo {

std::string to_string(BaseOptimizerKind kind) {
  switch (kind) {
    case BaseOptimizerKind::kPlainSgd: return "plain-sgd";
    case BaseOptimizerKind::kSgdNesterov: return "sgd-nesterov";
    case BaseOptimizerKind::kAdam: return "adam";
  }
  return "?";
}

std::string to_string(BufferStrategy strategy) {
  switch (strategy) {
    case BufferStrategy::kReset: return "reset";
    case BufferStrategy::kMaintain: return "maintain";
    case BufferStrategy::kAverage: return "average";
  }
  return "?";
}

BaseOptimizerKind parse_base_optimizer_kind(const std::string& name) {
  if (name == "plain-sgd") return BaseOptimizerKind::kPlainSgd;
  if (name == "sgd-nesterov") return BaseOptimizerKind::kSgdNesterov;
  if (name == "adam") return BaseOptimizerKind::kAdam;
  throw ConfigError("unknown base optimizer '" + name + "'");
}

BufferStrategy parse_buffer_strategy(const std::string& name) {
  if (name == "reset") return BufferStrategy::kReset;
  if (name == "maintain") return BufferStrategy::kMaintain;
  if (name == "average") return BufferStrategy::kAverage;
  throw ConfigError("unknown buffer strategy '" + name + "'");
}

void BaseOptimizerConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1)");
  };
  unit(momentum, "base_optimizer.momentum");
  unit(beta1, "base_optimizer.beta1");
  unit(beta2, "base_optimizer.beta2");
  if (!(eps > 0.0)) throw ConfigError("base_optimizer.eps must be positive");
}

ParameterVector local_direction(const BaseOptimizerConfig& config, OptimizerBuffers& buffers,
                                const ParameterVector& gradient) {
  if (buffers.h.size() != gradient.size() || buffers.v.size() != gradient.size())
    throw ConfigError("local_direction: buffer dimension does not match gradient");
  ++buffers.step;
  switch (config.kind) {
    case BaseOptimizerKind::kPlainSgd:
      return gradient;
    case BaseOptimizerKind::kSgdNesterov: {
      buffers.h = config.momentum * buffers.h + gradient;
      return config.momentum * buffers.h + gradient;
    }
    case BaseOptimizerKind::kAdam: {
      if (buffers.step == 0) throw InternalError("adam bias correction with l = 0");
      const auto l = static_cast<double>(buffers.step);
      buffers.h = config.beta1 * buffers.h + (1.0 - config.beta1) * gradient;
      buffers.v = config.beta2 * buffers.v + (1.0 - config.beta2) * gradient.cwiseProduct(gradient);
      const ParameterVector h_hat = buffers.h / (1.0 - std::pow(config.beta1, l));
      const ParameterVector v_hat = buffers.v / (1.0 - std::pow(config.beta2, l));
      return h_hat.array() / (v_hat.array().sqrt() + config.eps);
    }
  }
  throw InternalError("unreachable optimizer kind");
}

void apply_buffer_strategy(const BaseOptimizerConfig& config, std::span<OptimizerBuffers> buffers) {
  switch (config.buffer_strategy) {
    case BufferStrategy::kMaintain:
      return;
    case BufferStrategy::kReset:
      for (auto& b : buffers) {
        b.h.setZero();
        b.v.setZero();
        b.step = 0;
      }
      return;
    case BufferStrategy::kAverage: {
      if (buffers.empty()) return;
      // Rank-ordered sums, identical on every worker.
      ParameterVector h = buffers[0].h;
      ParameterVector v = buffers[0].v;
      for (std::size_t i = 1; i < buffers.size(); ++i) {
        h += buffers[i].h;
        v += buffers[i].v;
      }
      const auto m = static_cast<double>(buffers.size());
      h /= m;
      v /= m;
      for (auto& b : buffers) {
        b.h = h;
        b.v = v;
      }
      return;
    }
  }
}

}  // namespace slowmo
