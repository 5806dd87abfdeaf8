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

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slowmo {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense model parameters. Every worker-side quantity is built from these.
using ParameterVector = VectorX<double>;
using Matrix = MatrixX<double>;

using WorkerId = std::size_t;

/// Invalid experiment setup: bad ranges, unknown fields, incompatible choices.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A communication primitive was handed data that breaks its contract.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite parameters were produced; the run must stop.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (a bug, not a user error).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

inline void require_same_dimension(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw ConfigError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                      " vs " + std::to_string(b) + ")");
  }
}

}  // namespace slowmo
