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

#include "slowmo/numerics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace slowmo;
using slowmo::testing::vec;

namespace {

Problem two_point_quadratic() {
  return Problem::quadratic({Matrix::Identity(1, 1), Matrix::Identity(1, 1)}, {vec({1.0}), vec({-1.0})}, {});
}

Problem logistic_problem(std::size_t m = 3, double l2 = 0.01) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kLogistic;
  spec.dimension = 5;
  spec.data_seed = 4;
  spec.data.samples_per_worker = 40;
  spec.data.label_flip = 0.2;
  spec.data.l2 = l2;
  return make_problem(spec, m);
}

Problem mlp_problem(std::size_t m = 2) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kMlp;
  spec.dimension = 4;
  spec.data_seed = 8;
  spec.data.samples_per_worker = 30;
  spec.data.hidden = 5;
  return make_problem(spec, m);
}

ParameterVector random_point(RngStream& s, std::size_t d, double scale) {
  ParameterVector x(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = scale * s.normal();
  return x;
}

// Central differences, computed independently of the analytic gradient.
ParameterVector fd_gradient(const Problem& p, WorkerId i, const ParameterVector& x, double h = 1e-5) {
  ParameterVector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    ParameterVector a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (p.worker_loss(i, a) - p.worker_loss(i, b)) / (2 * h);
  }
  return g;
}

void expect_fd_match(const Problem& p, int points, double scale) {
  RngStream s(17, StreamPurpose::kEstimate, 3);
  for (int n = 0; n < points; ++n) {
    const ParameterVector x = random_point(s, p.dimension(), scale);
    for (std::size_t i = 0; i < p.workers(); ++i) {
      const ParameterVector g = p.worker_gradient(i, x);
      const ParameterVector fd = fd_gradient(p, i, x);
      EXPECT_LT((g - fd).norm() / std::max(1e-8, g.norm()), 1e-5) << "point " << n << " worker " << i;
    }
  }
}

}  // namespace

TEST(GlobalLoss, ZeroAtSymmetricMinimum) {
  Problem p = Problem::quadratic({Matrix::Identity(2, 2)}, {vec({0, 0})}, {});
  EXPECT_EQ(global_loss(p, vec({0, 0})), 0.0);
}

TEST(GlobalLoss, TwoWorkerHandValue) { EXPECT_DOUBLE_EQ(global_loss(two_point_quadratic(), vec({0.0})), 0.5); }

TEST(GlobalLoss, LogisticZeroWeightsIsLn2) {
  Problem p = logistic_problem(2, 0.0);
  EXPECT_NEAR(global_loss(p, ParameterVector::Zero(5)), std::log(2.0), 1e-15);
}

TEST(GlobalLoss, DimensionMismatchIsConfigError) {
  EXPECT_THROW(global_loss(two_point_quadratic(), vec({0.0, 1.0})), ConfigError);
}

TEST(Gradient, QuadraticExamples) {
  Problem p = Problem::quadratic({Matrix::Identity(2, 2)}, {vec({0, 0})}, {});
  EXPECT_EQ(worker_full_gradient(p, 0, vec({2, 0})), vec({2, 0}));
  Problem q = Problem::quadratic({Matrix::Identity(2, 2)}, {vec({3, -1})}, {});
  EXPECT_EQ(worker_full_gradient(q, 0, vec({3, -1})), ParameterVector::Zero(2));
}

TEST(Gradient, UnknownWorkerIsFatal) { EXPECT_THROW(worker_full_gradient(two_point_quadratic(), 5, vec({0})), ConfigError); }

TEST(Gradient, FiniteDifferencesQuadratic) {
  ProblemSpec spec;
  spec.dimension = 6;
  spec.quadratic.matrix = "random";
  spec.quadratic.eig_min = 0.1;
  spec.quadratic.eig_max = 3.0;
  spec.quadratic.shared_matrix = false;
  spec.quadratic.target_spread = 1.0;
  expect_fd_match(make_problem(spec, 3), 100, 1.0);
}

TEST(Gradient, FiniteDifferencesLogistic) { expect_fd_match(logistic_problem(), 100, 1.0); }

TEST(Gradient, FiniteDifferencesMlp) { expect_fd_match(mlp_problem(), 100, 0.7); }

TEST(Gradient, GlobalGradientIsWorkerMean) {
  Problem p = logistic_problem(4);
  const ParameterVector x = ParameterVector::Constant(5, 0.3);
  ParameterVector mean = ParameterVector::Zero(5);
  for (std::size_t i = 0; i < 4; ++i) mean += p.worker_gradient(i, x) / 4.0;
  EXPECT_LT((global_gradient(p, x) - mean).norm(), 1e-14);
}

TEST(MlpLayout, ParameterCount) {
  EXPECT_EQ(mlp_parameter_count(4, 5), 5u * 6u + 1u);
  EXPECT_EQ(mlp_problem().dimension(), 31u);
}

TEST(StochasticGradient, ZeroSigmaIsExact) {
  ProblemSpec spec;
  spec.dimension = 4;
  spec.quadratic.target_spread = 1.0;
  Problem p = make_problem(spec, 2);
  RngStream s(1, StreamPurpose::kGradient, 0);
  const ParameterVector x = vec({1, 2, 3, 4});
  EXPECT_EQ(worker_stochastic_gradient(p, 1, x, s), worker_full_gradient(p, 1, x));
  EXPECT_EQ(s.counter(), 0u);
}

TEST(StochasticGradient, AdditiveNoiseStatistics) {
  ProblemSpec spec;
  spec.dimension = 4;
  spec.noise.sigma = 1.0;
  Problem p = make_problem(spec, 1);
  const ParameterVector x = vec({0.5, -1, 2, 0});
  const ParameterVector g = worker_full_gradient(p, 0, x);
  RngStream s(2, StreamPurpose::kGradient, 0);
  const int n = 100000;
  ParameterVector sum = ParameterVector::Zero(4), sumsq = ParameterVector::Zero(4);
  double energy = 0.0;
  for (int k = 0; k < n; ++k) {
    const ParameterVector eta = worker_stochastic_gradient(p, 0, x, s) - g;
    sum += eta;
    sumsq += eta.cwiseProduct(eta);
    energy += eta.squaredNorm();
  }
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double mean = sum(j) / n;
    const double se = std::sqrt((sumsq(j) / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean), 4 * se);
  }
  EXPECT_NEAR(energy / n, 1.0, 0.05);
}

TEST(StochasticGradient, MinibatchUnbiased) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kLogistic;
  spec.dimension = 3;
  spec.noise.model = NoiseModel::kMinibatch;
  spec.noise.batch_size = 4;
  spec.data.samples_per_worker = 20;
  Problem p = make_problem(spec, 1);
  const ParameterVector x = vec({0.3, -0.2, 0.5});
  const ParameterVector g = worker_full_gradient(p, 0, x);
  RngStream s(3, StreamPurpose::kGradient, 0);
  const int n = 100000;
  ParameterVector sum = ParameterVector::Zero(3), sumsq = ParameterVector::Zero(3);
  for (int k = 0; k < n; ++k) {
    const ParameterVector d = worker_stochastic_gradient(p, 0, x, s) - g;
    sum += d;
    sumsq += d.cwiseProduct(d);
  }
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double mean = sum(j) / n;
    const double se = std::sqrt((sumsq(j) / n - mean * mean) / n);
    EXPECT_LT(std::abs(mean), 4 * se);
  }
}

TEST(StochasticGradient, FullBatchIsExact) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kMlp;
  spec.dimension = 3;
  spec.noise.model = NoiseModel::kMinibatch;
  spec.noise.batch_size = 25;
  spec.data.samples_per_worker = 25;
  spec.data.hidden = 3;
  Problem p = make_problem(spec, 2);
  RngStream s(4, StreamPurpose::kGradient, 1);
  const ParameterVector x = ParameterVector::Constant(static_cast<Eigen::Index>(p.dimension()), 0.1);
  EXPECT_EQ(worker_stochastic_gradient(p, 1, x, s), worker_full_gradient(p, 1, x));
}

TEST(ProblemBuild, QuadraticRejectsMinibatchAndBadMatrices) {
  NoiseSpec mb{NoiseModel::kMinibatch, 0.0, 2};
  EXPECT_THROW(Problem::quadratic({Matrix::Identity(1, 1)}, {vec({0})}, mb), ConfigError);
  Matrix neg = -Matrix::Identity(2, 2);
  EXPECT_THROW(Problem::quadratic({neg}, {vec({0, 0})}, {}), ConfigError);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  EXPECT_THROW(Problem::quadratic({asym}, {vec({0, 0})}, {}), ConfigError);
}

TEST(ProblemBuild, ShardsAreDeterministic) {
  Problem a = logistic_problem(), b = logistic_problem();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.shard(i).features, b.shard(i).features);
    EXPECT_EQ(a.shard(i).labels, b.shard(i).labels);
  }
  EXPECT_NE(a.shard(0).features, a.shard(1).features);
}

TEST(ProblemBuild, LabelFlipGrowsWithRank) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kLogistic;
  spec.dimension = 5;
  spec.data.samples_per_worker = 4000;
  spec.data.label_flip = 0.4;
  spec.data_seed = 1;
  Problem p = make_problem(spec, 5);
  // Disagreement with the best linear separator of worker 0's clean shard grows with i.
  ParameterVector w = ParameterVector::Zero(5);
  for (int it = 0; it < 300; ++it) w -= 2.0 * p.worker_gradient(0, w);
  std::vector<double> err;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& s = p.shard(i);
    double wrong = 0;
    for (Eigen::Index r = 0; r < s.features.rows(); ++r)
      wrong += ((s.features.row(r).dot(w) > 0) != (s.labels(r) > 0.5)) ? 1 : 0;
    err.push_back(wrong / static_cast<double>(s.features.rows()));
  }
  EXPECT_LT(err.front(), 0.05);
  EXPECT_NEAR(err.back(), 0.4, 0.05);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_GT(err[i], err[i - 1] - 0.02);
}

TEST(Constants, DiagonalL) {
  Matrix a = vec({1, 4}).asDiagonal();
  Problem p = Problem::quadratic({a, a}, {vec({0, 0}), vec({1, 1})}, {});
  const ProblemConstants c = problem_constants(p, vec({0, 0}));
  EXPECT_NEAR(c.L, 4.0, 4e-10);
  EXPECT_TRUE(c.L_exact);
}

TEST(Constants, PowerIterationMatchesEigensolver) {
  ProblemSpec spec;
  spec.dimension = 8;
  spec.quadratic.matrix = "random";
  spec.quadratic.eig_min = 0.5;
  spec.quadratic.eig_max = 5.0;
  Problem p = make_problem(spec, 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(p.matrix(0));
  EXPECT_NEAR(largest_eigenvalue(p.matrix(0)), eig.eigenvalues().maxCoeff(), 1e-9 * 5.0);
}

TEST(Constants, HomogeneousZetaIsZero) {
  ProblemSpec spec;
  spec.dimension = 3;
  Problem p = make_problem(spec, 4);
  const ProblemConstants c = problem_constants(p, ParameterVector::Zero(3));
  EXPECT_EQ(c.zeta2, 0.0);
  EXPECT_TRUE(c.zeta2_exact);
}

TEST(Constants, TwoPointZetaIsOne) {
  const ProblemConstants c = problem_constants(two_point_quadratic(), vec({0.0}));
  EXPECT_DOUBLE_EQ(c.zeta2, 1.0);
  EXPECT_DOUBLE_EQ(c.f_inf, 0.5);
  EXPECT_TRUE(c.f_inf_exact);
  EXPECT_FALSE(c.estimated());
}

TEST(Constants, NonQuadraticFlaggedAsEstimate) {
  Problem p = logistic_problem();
  const ProblemConstants c = problem_constants(p, ParameterVector::Zero(5));
  EXPECT_TRUE(c.estimated());
  EXPECT_EQ(c.f_inf, 0.0);
  EXPECT_GT(c.L, 0.0);
}

TEST(Constants, LipschitzHoldsOnRandomPairs) {
  ProblemSpec spec;
  spec.dimension = 5;
  spec.quadratic.matrix = "random";
  spec.quadratic.eig_max = 3.0;
  spec.quadratic.shared_matrix = false;
  std::vector<Problem> problems{make_problem(spec, 3), logistic_problem(), mlp_problem()};
  RngStream s(23, StreamPurpose::kEstimate, 9);
  for (const auto& p : problems) {
    const ParameterVector ref = ParameterVector::Zero(static_cast<Eigen::Index>(p.dimension()));
    const double L = problem_constants(p, ref).L;
    for (int n = 0; n < 1000; ++n) {
      const ParameterVector x = random_point(s, p.dimension(), 1.0);
      const ParameterVector y = x + random_point(s, p.dimension(), n % 2 ? 1e-2 : 1.0);
      for (std::size_t i = 0; i < p.workers(); ++i) {
        const double lhs = (p.worker_gradient(i, x) - p.worker_gradient(i, y)).norm();
        EXPECT_LE(lhs, L * (x - y).norm() * (1 + 1e-9));
      }
    }
  }
}

TEST(Constants, MinibatchSigmaMatchesEmpiricalVariance) {
  ProblemSpec spec;
  spec.kind = ProblemKind::kLogistic;
  spec.dimension = 3;
  spec.noise.model = NoiseModel::kMinibatch;
  spec.noise.batch_size = 5;
  spec.data.samples_per_worker = 30;
  Problem p = make_problem(spec, 1);
  const ParameterVector x = vec({0.2, 0.1, -0.4});
  const double sigma2 = problem_constants(p, x).sigma2;
  RngStream s(6, StreamPurpose::kGradient, 0);
  const ParameterVector g = p.worker_gradient(0, x);
  double total = 0.0;
  const int n = 50000;
  for (int k = 0; k < n; ++k) total += (worker_stochastic_gradient(p, 0, x, s) - g).squaredNorm();
  EXPECT_NEAR(total / n, sigma2, 0.03 * sigma2);
}
