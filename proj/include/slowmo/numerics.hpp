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
#include "slowmo/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slowmo {

enum class ProblemKind { kQuadratic, kLogistic, kMlp };
enum class NoiseModel { kAdditiveGaussian, kMinibatch };

std::string to_string(ProblemKind kind);
std::string to_string(NoiseModel model);
ProblemKind parse_problem_kind(const std::string& name);
NoiseModel parse_noise_model(const std::string& name);

struct NoiseSpec {
  NoiseModel model = NoiseModel::kAdditiveGaussian;
  double sigma = 0.0;           // additive-gaussian: E||eta||^2 = sigma^2
  std::size_t batch_size = 1;   // minibatch
};

struct QuadraticSpec {
  std::string matrix = "identity";  // identity | diagonal | random
  std::vector<double> eigenvalues;  // diagonal: explicit spectrum (length d), else linspace
  double eig_min = 1.0;
  double eig_max = 1.0;
  bool shared_matrix = true;
  double target_scale = 1.0;   // common centre c ~ scale * N(0, I)
  double target_spread = 0.0;  // b_i = c + spread * N(0, I)
  std::optional<std::vector<Matrix>> matrices;          // explicit A_i, overrides generation
  std::optional<std::vector<ParameterVector>> targets;  // explicit b_i
};

struct DatasetSpec {
  std::size_t samples_per_worker = 200;
  double label_flip = 0.0;  // worker i flips labels with probability label_flip * i / (m - 1)
  double feature_scale = 1.0;
  double l2 = 0.0;
  bool shared_data = false;  // every worker holds the same shard
  std::size_t hidden = 8;    // mlp only
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kQuadratic;
  std::size_t dimension = 10;  // parameter dimension (quadratic, logistic) or input dimension (mlp)
  NoiseSpec noise;
  QuadraticSpec quadratic;
  DatasetSpec data;
  std::uint64_t data_seed = 0;
};

/// Labelled binary-classification shard: one row per sample.
struct Dataset {
  Matrix features;
  ParameterVector labels;  // 0 or 1
};

/// f(x) = (1/m) sum_i f_i(x), with worker i holding its own objective f_i and
/// a stochastic oracle grad F_i(x; xi).
class Problem {
 public:
  static Problem quadratic(std::vector<Matrix> matrices, std::vector<ParameterVector> targets, NoiseSpec noise);
  static Problem logistic(std::vector<Dataset> shards, double l2, NoiseSpec noise);
  static Problem mlp(std::vector<Dataset> shards, std::size_t hidden, NoiseSpec noise);

  ProblemKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t workers() const { return workers_; }
  const NoiseSpec& noise() const { return noise_; }
  double l2() const { return l2_; }
  std::size_t hidden() const { return hidden_; }

  const Matrix& matrix(WorkerId i) const { return matrices_.at(i); }
  const ParameterVector& target(WorkerId i) const { return targets_.at(i); }
  const Dataset& shard(WorkerId i) const { return shards_.at(i); }

  double worker_loss(WorkerId i, const ParameterVector& x) const;
  ParameterVector worker_gradient(WorkerId i, const ParameterVector& x) const;
  /// Gradient of the loss restricted to `rows` of worker i's shard (sorted ascending).
  ParameterVector batch_gradient(WorkerId i, const ParameterVector& x, std::span<const Eigen::Index> rows) const;

 private:
  Problem() = default;
  void check(WorkerId i, const ParameterVector& x) const;

  ProblemKind kind_ = ProblemKind::kQuadratic;
  std::size_t dimension_ = 0;
  std::size_t workers_ = 0;
  NoiseSpec noise_;
  double l2_ = 0.0;
  std::size_t hidden_ = 0;
  std::vector<Matrix> matrices_;
  std::vector<ParameterVector> targets_;
  std::vector<Dataset> shards_;
};

Problem make_problem(const ProblemSpec& spec, std::size_t workers);

/// Parameter count of the two-layer tanh network.
std::size_t mlp_parameter_count(std::size_t input_dim, std::size_t hidden);

double global_loss(const Problem& problem, const ParameterVector& x);
ParameterVector global_gradient(const Problem& problem, const ParameterVector& x);
ParameterVector worker_full_gradient(const Problem& problem, WorkerId worker, const ParameterVector& x);
ParameterVector worker_stochastic_gradient(const Problem& problem, WorkerId worker, const ParameterVector& x,
                                           RngStream& stream);

struct ProblemConstants {
  double L = 0.0;
  double sigma2 = 0.0;
  double zeta2 = 0.0;
  double f_inf = 0.0;
  bool L_exact = false;
  bool sigma2_exact = false;
  bool zeta2_exact = false;
  bool f_inf_exact = false;

  bool estimated() const { return !(L_exact && sigma2_exact && zeta2_exact && f_inf_exact); }
};

/// Smoothness, noise, diversity and lower-bound constants. `reference` anchors the
/// evaluation grid used for the estimated quantities.
ProblemConstants problem_constants(const Problem& problem, const ParameterVector& reference);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double largest_eigenvalue(const Matrix& a, double rel_tol = 1e-10, int max_iter = 200000);

/// Exact minimiser of a quadratic problem's global objective.
ParameterVector quadratic_minimizer(const Problem& problem);

}  // namespace slowmo
