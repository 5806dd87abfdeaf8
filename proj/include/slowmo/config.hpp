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
#include "slowmo/numerics.hpp"
#include "slowmo/slowmo.hpp"
#include "slowmo/topology.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace slowmo {

struct InitSpec {
  std::string kind = "zeros";  // zeros | constant | gaussian | explicit
  double value = 0.0;          // constant
  double scale = 1.0;          // gaussian
  std::optional<std::vector<double>> x0;  // explicit
};

struct TopologySpec {
  TopologyKind kind = TopologyKind::kExponentialDirected;
  std::optional<std::string> path;  // custom
};

struct OsgpSpec {
  std::string delay_model = "fixed";  // fixed | geometric
  std::uint64_t delay = 0;
  double geometric_p = 0.5;  // geometric draws are capped at the staleness bound
  std::uint64_t staleness = 1;
};

struct OutputSpec {
  std::string dir = "out";
  std::string format = "both";  // jsonl | csv | both
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::size_t workers = 4;
  ProtocolKind protocol = ProtocolKind::kAllReduce;
  BaseOptimizerConfig base;
  double weight_decay = 0.0;
  SlowMoHyper slowmo;
  TopologySpec topology;
  OsgpSpec osgp;
  std::uint64_t double_average_period = 0;  // 0 before resolution means "tau"
  std::uint64_t outer_iterations = 100;
  std::uint64_t total_steps = 0;  // base steps; the last block may be partial
  std::uint64_t seed = 0;
  std::uint64_t cadence = 1;  // record every cadence-th base step
  InitSpec init;
  bool parallel = false;
  unsigned threads = 0;
  OutputSpec output;
};

/// Resolves defaults and validates. Unknown keys and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& raw);
ExperimentConfig parse_config_file(const std::string& path);

/// Fully resolved dump: every field present.
nlohmann::json to_json(const ExperimentConfig& config);
void write_resolved(const ExperimentConfig& config, const std::string& dir);

/// Sets a dotted path ("slowmo.beta") inside a raw config, creating objects as needed.
void set_path(nlohmann::json& raw, const std::string& dotted, const nlohmann::json& value);

struct SweepPoint {
  std::string name;     // run-000, run-001, ...
  nlohmann::json raw;   // base config with the grid values substituted
  nlohmann::json values;  // dotted path -> value for this point
};

/// Cartesian product of {"dotted.path": [v1, v2, ...], ...} over a raw base config.
/// Paths vary in sorted order, the last one fastest.
std::vector<SweepPoint> expand_grid(const nlohmann::json& base, const nlohmann::json& grid);

TopologySchedule make_topology(const ExperimentConfig& config);
ProtocolConfig protocol_config(const ExperimentConfig& config);
ParameterVector initial_point(const ExperimentConfig& config, const Problem& problem);

/// sqrt(m / (tau T)) (1 - beta) / alpha, so that alpha gamma / (1 - beta) = sqrt(m / (tau T)).
double theory_gamma(std::size_t workers, std::uint64_t total_steps, double alpha, double beta);

}  // namespace slowmo
