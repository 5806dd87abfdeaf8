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

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slowmo {

namespace {

double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

// Logistic loss and gradient over the selected rows; mean over rows.
double logistic_loss(const Dataset& data, const ParameterVector& w, std::span<const Eigen::Index> rows) {
  double total = 0.0;
  for (Eigen::Index r : rows) {
    const double s = data.features.row(r).dot(w);
    total += softplus(s) - data.labels(r) * s;
  }
  return total / static_cast<double>(rows.size());
}

ParameterVector logistic_gradient(const Dataset& data, const ParameterVector& w, std::span<const Eigen::Index> rows) {
  ParameterVector g = ParameterVector::Zero(w.size());
  for (Eigen::Index r : rows) {
    const double s = data.features.row(r).dot(w);
    g.noalias() += (sigmoid(s) - data.labels(r)) * data.features.row(r).transpose();
  }
  return g / static_cast<double>(rows.size());
}

// Two-layer tanh network, parameters packed as [W1 (h x p, column-major), b1 (h), w2 (h), b2].
struct MlpView {
  Eigen::Map<const Matrix> w1;
  Eigen::Map<const ParameterVector> b1;
  Eigen::Map<const ParameterVector> w2;
  double b2;

  MlpView(const ParameterVector& theta, Eigen::Index p, Eigen::Index h)
      : w1(theta.data(), h, p), b1(theta.data() + h * p, h), w2(theta.data() + h * p + h, h),
        b2(theta(h * p + 2 * h)) {}
};

double mlp_loss(const Dataset& data, const ParameterVector& theta, std::size_t hidden,
                std::span<const Eigen::Index> rows) {
  const Eigen::Index p = data.features.cols();
  const auto h = static_cast<Eigen::Index>(hidden);
  const MlpView net(theta, p, h);
  double total = 0.0;
  for (Eigen::Index r : rows) {
    const ParameterVector act = (net.w1 * data.features.row(r).transpose() + net.b1).array().tanh().matrix();
    const double s = net.w2.dot(act) + net.b2;
    total += softplus(s) - data.labels(r) * s;
  }
  return total / static_cast<double>(rows.size());
}

ParameterVector mlp_gradient(const Dataset& data, const ParameterVector& theta, std::size_t hidden,
                             std::span<const Eigen::Index> rows) {
  const Eigen::Index p = data.features.cols();
  const auto h = static_cast<Eigen::Index>(hidden);
  const MlpView net(theta, p, h);
  ParameterVector grad = ParameterVector::Zero(theta.size());
  Eigen::Map<Matrix> g_w1(grad.data(), h, p);
  Eigen::Map<ParameterVector> g_b1(grad.data() + h * p, h);
  Eigen::Map<ParameterVector> g_w2(grad.data() + h * p + h, h);
  double g_b2 = 0.0;
  for (Eigen::Index r : rows) {
    const ParameterVector input = data.features.row(r).transpose();
    const ParameterVector act = (net.w1 * input + net.b1).array().tanh().matrix();
    const double s = net.w2.dot(act) + net.b2;
    const double delta = sigmoid(s) - data.labels(r);
    g_w2.noalias() += delta * act;
    g_b2 += delta;
    const ParameterVector back = (delta * net.w2.array() * (1.0 - act.array().square())).matrix();
    g_w1.noalias() += back * input.transpose();
    g_b1.noalias() += back;
  }
  grad(h * p + 2 * h) = g_b2;
  return grad / static_cast<double>(rows.size());
}

Matrix random_orthogonal(Eigen::Index d, RngStream& stream) {
  Matrix g(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = stream.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ();
}

ParameterVector gaussian_vector(Eigen::Index d, double scale, RngStream& stream) {
  ParameterVector v(d);
  for (Eigen::Index j = 0; j < d; ++j) v(j) = scale * stream.normal();
  return v;
}

std::vector<double> spectrum(const QuadraticSpec& spec, std::size_t d) {
  if (!spec.eigenvalues.empty()) {
    if (spec.eigenvalues.size() != d) throw ConfigError("quadratic.eigenvalues must have one entry per dimension");
    return spec.eigenvalues;
  }
  std::vector<double> ev(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double frac = d == 1 ? 1.0 : static_cast<double>(j) / static_cast<double>(d - 1);
    ev[j] = spec.eig_min + frac * (spec.eig_max - spec.eig_min);
  }
  return ev;
}

Problem make_quadratic(const ProblemSpec& spec, std::size_t m) {
  const auto d = static_cast<Eigen::Index>(spec.dimension);
  const QuadraticSpec& q = spec.quadratic;
  std::vector<Matrix> matrices;
  std::vector<ParameterVector> targets;

  if (q.matrices) {
    matrices = *q.matrices;
  } else {
    auto build = [&](RngStream& stream) -> Matrix {
      if (q.matrix == "identity") return Matrix::Identity(d, d);
      const auto ev = spectrum(q, spec.dimension);
      const ParameterVector lambda = Eigen::Map<const ParameterVector>(ev.data(), d);
      if (q.matrix == "diagonal") return lambda.asDiagonal();
      if (q.matrix == "random") {
        const Matrix basis = random_orthogonal(d, stream);
        return basis * lambda.asDiagonal() * basis.transpose();
      }
      throw ConfigError("unknown quadratic.matrix '" + q.matrix + "' (expected identity|diagonal|random)");
    };
    RngStream shared(spec.data_seed, StreamPurpose::kData, 0);
    const Matrix common = build(shared);
    for (std::size_t i = 0; i < m; ++i) {
      if (q.shared_matrix) {
        matrices.push_back(common);
      } else {
        RngStream own(spec.data_seed, StreamPurpose::kData, 10 + i);
        matrices.push_back(build(own));
      }
    }
  }

  if (q.targets) {
    targets = *q.targets;
  } else {
    RngStream centre_stream(spec.data_seed, StreamPurpose::kData, 1);
    const ParameterVector centre =
        q.target_scale == 0.0 ? ParameterVector::Zero(d) : gaussian_vector(d, q.target_scale, centre_stream);
    for (std::size_t i = 0; i < m; ++i) {
      RngStream spread(spec.data_seed, StreamPurpose::kData, 1000 + i);
      targets.push_back(q.target_spread == 0.0 ? centre : ParameterVector(centre + gaussian_vector(d, q.target_spread, spread)));
    }
  }
  return Problem::quadratic(std::move(matrices), std::move(targets), spec.noise);
}

std::vector<Dataset> make_shards(const ProblemSpec& spec, std::size_t m) {
  const auto p = static_cast<Eigen::Index>(spec.dimension);
  const DatasetSpec& ds = spec.data;
  if (ds.samples_per_worker == 0) throw ConfigError("data.samples_per_worker must be positive");
  const auto n = static_cast<Eigen::Index>(ds.samples_per_worker);

  RngStream teacher_stream(spec.data_seed, StreamPurpose::kData, 0);
  const ParameterVector teacher = gaussian_vector(p, 1.0, teacher_stream);

  auto generate = [&](std::size_t stream_index, double flip) {
    RngStream stream(spec.data_seed, StreamPurpose::kData, stream_index);
    Dataset shard{Matrix(n, p), ParameterVector(n)};
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < p; ++c) shard.features(r, c) = ds.feature_scale * stream.normal();
      double label = shard.features.row(r).dot(teacher) > 0.0 ? 1.0 : 0.0;
      if (stream.uniform() < flip) label = 1.0 - label;
      shard.labels(r) = label;
    }
    return shard;
  };

  std::vector<Dataset> shards;
  for (std::size_t i = 0; i < m; ++i) {
    if (ds.shared_data) {
      shards.push_back(generate(1, 0.0));
    } else {
      const double flip = m > 1 ? ds.label_flip * static_cast<double>(i) / static_cast<double>(m - 1) : 0.0;
      shards.push_back(generate(1 + i, flip));
    }
  }
  return shards;
}

double diversity_at(const Problem& problem, const ParameterVector& x) {
  const ParameterVector full = global_gradient(problem, x);
  double total = 0.0;
  for (std::size_t i = 0; i < problem.workers(); ++i)
    total += (full - problem.worker_gradient(i, x)).squaredNorm();
  return total / static_cast<double>(problem.workers());
}

}  // namespace

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kQuadratic: return "quadratic";
    case ProblemKind::kLogistic: return "logistic";
    case ProblemKind::kMlp: return "mlp";
  }
  return "?";
}

std::string to_string(NoiseModel model) {
  return model == NoiseModel::kAdditiveGaussian ? "additive-gaussian" : "minibatch";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "quadratic") return ProblemKind::kQuadratic;
  if (name == "logistic") return ProblemKind::kLogistic;
  if (name == "mlp") return ProblemKind::kMlp;
  throw ConfigError("unknown problem kind '" + name + "'");
}

NoiseModel parse_noise_model(const std::string& name) {
  if (name == "additive-gaussian") return NoiseModel::kAdditiveGaussian;
  if (name == "minibatch") return NoiseModel::kMinibatch;
  throw ConfigError("unknown noise model '" + name + "'");
}

std::size_t mlp_parameter_count(std::size_t input_dim, std::size_t hidden) { return hidden * (input_dim + 2) + 1; }

Problem Problem::quadratic(std::vector<Matrix> matrices, std::vector<ParameterVector> targets, NoiseSpec noise) {
  if (matrices.empty() || matrices.size() != targets.size())
    throw ConfigError("quadratic problem needs one matrix and one target per worker");
  if (noise.model != NoiseModel::kAdditiveGaussian)
    throw ConfigError("quadratic problems only support the additive-gaussian noise model");
  Problem p;
  p.kind_ = ProblemKind::kQuadratic;
  p.dimension_ = static_cast<std::size_t>(targets.front().size());
  p.workers_ = matrices.size();
  p.noise_ = noise;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const Matrix& a = matrices[i];
    const auto d = static_cast<Eigen::Index>(p.dimension_);
    if (a.rows() != d || a.cols() != d || targets[i].size() != d)
      throw ConfigError("quadratic worker " + std::to_string(i) + ": matrix/target dimension mismatch");
    if (!a.isApprox(a.transpose(), 1e-12)) throw ConfigError("quadratic matrices must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(a, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff()))
      throw ConfigError("quadratic matrices must be positive semidefinite");
  }
  p.matrices_ = std::move(matrices);
  p.targets_ = std::move(targets);
  return p;
}

Problem Problem::logistic(std::vector<Dataset> shards, double l2, NoiseSpec noise) {
  if (shards.empty()) throw ConfigError("logistic problem needs at least one shard");
  Problem p;
  p.kind_ = ProblemKind::kLogistic;
  p.dimension_ = static_cast<std::size_t>(shards.front().features.cols());
  p.workers_ = shards.size();
  p.noise_ = noise;
  p.l2_ = l2;
  p.shards_ = std::move(shards);
  return p;
}

Problem Problem::mlp(std::vector<Dataset> shards, std::size_t hidden, NoiseSpec noise) {
  if (shards.empty()) throw ConfigError("mlp problem needs at least one shard");
  if (hidden == 0) throw ConfigError("mlp hidden width must be positive");
  Problem p;
  p.kind_ = ProblemKind::kMlp;
  p.dimension_ = mlp_parameter_count(static_cast<std::size_t>(shards.front().features.cols()), hidden);
  p.workers_ = shards.size();
  p.noise_ = noise;
  p.hidden_ = hidden;
  p.shards_ = std::move(shards);
  return p;
}

void Problem::check(WorkerId i, const ParameterVector& x) const {
  if (i >= workers_) throw ConfigError("unknown worker id " + std::to_string(i));
  require_same_dimension(x.size(), static_cast<Eigen::Index>(dimension_), "problem evaluation");
}

double Problem::worker_loss(WorkerId i, const ParameterVector& x) const {
  check(i, x);
  switch (kind_) {
    case ProblemKind::kQuadratic: {
      const ParameterVector r = x - targets_[i];
      return 0.5 * r.dot(matrices_[i] * r);
    }
    case ProblemKind::kLogistic: {
      const auto rows = all_rows(shards_[i].features.rows());
      return logistic_loss(shards_[i], x, rows) + 0.5 * l2_ * x.squaredNorm();
    }
    case ProblemKind::kMlp: {
      const auto rows = all_rows(shards_[i].features.rows());
      return mlp_loss(shards_[i], x, hidden_, rows);
    }
  }
  throw InternalError("unreachable problem kind");
}

ParameterVector Problem::worker_gradient(WorkerId i, const ParameterVector& x) const {
  check(i, x);
  if (kind_ == ProblemKind::kQuadratic) return matrices_[i] * (x - targets_[i]);
  const auto rows = all_rows(shards_[i].features.rows());
  return batch_gradient(i, x, rows);
}

ParameterVector Problem::batch_gradient(WorkerId i, const ParameterVector& x,
                                        std::span<const Eigen::Index> rows) const {
  check(i, x);
  switch (kind_) {
    case ProblemKind::kQuadratic:
      return matrices_[i] * (x - targets_[i]);
    case ProblemKind::kLogistic:
      return logistic_gradient(shards_[i], x, rows) + l2_ * x;
    case ProblemKind::kMlp:
      return mlp_gradient(shards_[i], x, hidden_, rows);
  }
  throw InternalError("unreachable problem kind");
}

Problem make_problem(const ProblemSpec& spec, std::size_t workers) {
  if (workers == 0) throw ConfigError("worker count must be positive");
  if (spec.dimension == 0) throw ConfigError("problem dimension must be positive");
  switch (spec.kind) {
    case ProblemKind::kQuadratic:
      return make_quadratic(spec, workers);
    case ProblemKind::kLogistic:
      return Problem::logistic(make_shards(spec, workers), spec.data.l2, spec.noise);
    case ProblemKind::kMlp:
      return Problem::mlp(make_shards(spec, workers), spec.data.hidden, spec.noise);
  }
  throw InternalError("unreachable problem kind");
}

double global_loss(const Problem& problem, const ParameterVector& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < problem.workers(); ++i) total += problem.worker_loss(i, x);
  return total / static_cast<double>(problem.workers());
}

ParameterVector global_gradient(const Problem& problem, const ParameterVector& x) {
  ParameterVector total = problem.worker_gradient(0, x);
  for (std::size_t i = 1; i < problem.workers(); ++i) total += problem.worker_gradient(i, x);
  return total / static_cast<double>(problem.workers());
}

ParameterVector worker_full_gradient(const Problem& problem, WorkerId worker, const ParameterVector& x) {
  return problem.worker_gradient(worker, x);
}

ParameterVector worker_stochastic_gradient(const Problem& problem, WorkerId worker, const ParameterVector& x,
                                           RngStream& stream) {
  const NoiseSpec& noise = problem.noise();
  if (noise.model == NoiseModel::kAdditiveGaussian) {
    ParameterVector g = problem.worker_gradient(worker, x);
    if (noise.sigma == 0.0) return g;
    const double scale = noise.sigma / std::sqrt(static_cast<double>(g.size()));
    for (Eigen::Index j = 0; j < g.size(); ++j) g(j) += scale * stream.normal();
    return g;
  }

  const Eigen::Index n = problem.shard(worker).features.rows();
  const auto b = static_cast<Eigen::Index>(std::min<std::size_t>(noise.batch_size, static_cast<std::size_t>(n)));
  std::vector<Eigen::Index> rows = all_rows(n);
  if (b < n) {
    // Partial Fisher-Yates: the first b slots become a uniform sample without replacement.
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto pick = j + static_cast<Eigen::Index>(stream.below(static_cast<std::uint64_t>(n - j)));
      std::swap(rows[static_cast<std::size_t>(j)], rows[static_cast<std::size_t>(pick)]);
    }
    rows.resize(static_cast<std::size_t>(b));
    std::sort(rows.begin(), rows.end());
  }
  return problem.batch_gradient(worker, x, rows);
}

double largest_eigenvalue(const Matrix& a, double rel_tol, int max_iter) {
  if (a.rows() != a.cols()) throw ConfigError("largest_eigenvalue: matrix must be square");
  const Eigen::Index d = a.rows();
  ParameterVector v(d);
  for (Eigen::Index j = 0; j < d; ++j) v(j) = 1.0 + 1e-3 * static_cast<double>(j + 1);
  v.normalize();
  double lambda = v.dot(a * v);
  for (int it = 0; it < max_iter; ++it) {
    const ParameterVector w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const ParameterVector av = a * v;
    const double next = v.dot(av);
    const double residual = (av - next * v).norm();
    const bool settled = std::abs(next - lambda) <= rel_tol * std::abs(next);
    lambda = next;
    if (settled && residual <= 1e-6 * std::abs(next)) return lambda;
  }
  return lambda;
}

ParameterVector quadratic_minimizer(const Problem& problem) {
  if (problem.kind() != ProblemKind::kQuadratic) throw ConfigError("quadratic_minimizer needs a quadratic problem");
  const auto d = static_cast<Eigen::Index>(problem.dimension());
  Matrix sum_a = Matrix::Zero(d, d);
  ParameterVector sum_ab = ParameterVector::Zero(d);
  for (std::size_t i = 0; i < problem.workers(); ++i) {
    sum_a += problem.matrix(i);
    sum_ab += problem.matrix(i) * problem.target(i);
  }
  return sum_a.completeOrthogonalDecomposition().solve(sum_ab);
}

ProblemConstants problem_constants(const Problem& problem, const ParameterVector& reference) {
  require_same_dimension(reference.size(), static_cast<Eigen::Index>(problem.dimension()), "problem_constants");
  ProblemConstants c;
  const std::size_t m = problem.workers();
  const auto d = static_cast<Eigen::Index>(problem.dimension());

  if (problem.noise().model == NoiseModel::kAdditiveGaussian) {
    c.sigma2 = problem.noise().sigma * problem.noise().sigma;
    c.sigma2_exact = true;
  } else {
    // Without-replacement sampling: E||g_B - g||^2 = (n - b) / (b (n - 1)) * (1/n) sum_j ||g_j - g||^2,
    // evaluated at the reference point only.
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Eigen::Index n = problem.shard(i).features.rows();
      const auto b = static_cast<double>(std::min<std::size_t>(problem.noise().batch_size, static_cast<std::size_t>(n)));
      if (n < 2 || b >= static_cast<double>(n)) continue;
      const ParameterVector full = problem.worker_gradient(i, reference);
      double spread = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index row[1] = {r};
        spread += (problem.batch_gradient(i, reference, row) - full).squaredNorm();
      }
      spread /= static_cast<double>(n);
      const double nn = static_cast<double>(n);
      worst = std::max(worst, (nn - b) / (b * (nn - 1.0)) * spread);
    }
    c.sigma2 = worst;
    c.sigma2_exact = false;
  }

  switch (problem.kind()) {
    case ProblemKind::kQuadratic: {
      for (std::size_t i = 0; i < m; ++i) c.L = std::max(c.L, largest_eigenvalue(problem.matrix(i)));
      c.L_exact = true;
      const ParameterVector xstar = quadratic_minimizer(problem);
      c.f_inf = global_loss(problem, xstar);
      c.f_inf_exact = true;
      bool shared = true;
      for (std::size_t i = 1; i < m; ++i) shared = shared && problem.matrix(i) == problem.matrix(0);
      if (shared) {
        // grad f - grad f_i is constant in x when every worker shares A.
        c.zeta2 = diversity_at(problem, xstar);
        c.zeta2_exact = true;
      } else {
        const double radius = std::max(1.0, (reference - xstar).norm());
        c.zeta2 = std::max(diversity_at(problem, reference), diversity_at(problem, xstar));
        for (Eigen::Index j = 0; j < d; ++j) {
          for (double sign : {-1.0, 1.0}) {
            ParameterVector x = xstar;
            x(j) += sign * radius;
            c.zeta2 = std::max(c.zeta2, diversity_at(problem, x));
          }
        }
        c.zeta2_exact = false;
      }
      break;
    }
    case ProblemKind::kLogistic: {
      // 1/4 lambda_max(X^T X / n) + l2 bounds the Hessian of the logistic loss.
      for (std::size_t i = 0; i < m; ++i) {
        const Matrix& x = problem.shard(i).features;
        const Matrix gram = x.transpose() * x / static_cast<double>(x.rows());
        c.L = std::max(c.L, 0.25 * largest_eigenvalue(gram) + problem.l2());
      }
      break;
    }
    case ProblemKind::kMlp: {
      RngStream stream(0x5eed, StreamPurpose::kEstimate, 0);
      double ratio = 0.0;
      for (int pair = 0; pair < 200; ++pair) {
        const ParameterVector x = reference + gaussian_vector(d, 1.0, stream);
        const double scale = pair % 2 == 0 ? 1.0 : 1e-3;
        const ParameterVector y = x + gaussian_vector(d, scale, stream);
        for (std::size_t i = 0; i < m; ++i) {
          const double num = (problem.worker_gradient(i, x) - problem.worker_gradient(i, y)).norm();
          ratio = std::max(ratio, num / (x - y).norm());
        }
      }
      c.L = 2.0 * ratio;
      break;
    }
  }

  if (problem.kind() != ProblemKind::kQuadratic) {
    // Nonnegative losses; the true infimum may be larger.
    c.f_inf = 0.0;
    RngStream stream(0x5eed, StreamPurpose::kEstimate, 1);
    c.zeta2 = diversity_at(problem, reference);
    for (int k = 0; k < 32; ++k) c.zeta2 = std::max(c.zeta2, diversity_at(problem, reference + gaussian_vector(d, 1.0, stream)));
  }
  return c;
}

}  // namespace slowmo
