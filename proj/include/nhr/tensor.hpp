// Copyright 2026 The NHR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nhr/errors.hpp"

namespace nhr {

// Dense row-major storage so embedding rows are contiguous.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using VectorRef = Eigen::Ref<const Vector<Scalar>>;

using Shape = std::vector<std::int64_t>;

// View a parameter matrix as a flat column vector (used for biases and
// output weights, which are stored as n x 1 or 1 x n matrices).
template <typename Scalar>
Eigen::Map<Vector<Scalar>> flat(Matrix<Scalar>& m) {
  return Eigen::Map<Vector<Scalar>>(m.data(), m.size());
}
template <typename Scalar>
Eigen::Map<const Vector<Scalar>> flat(const Matrix<Scalar>& m) {
  return Eigen::Map<const Vector<Scalar>>(m.data(), m.size());
}

// A learned array with its gradient buffer and Adam moments. Rank-1
// parameters of length n are held as n x 1 matrices.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  Matrix<Scalar> m;
  Matrix<Scalar> v;
  int rank = 2;
  std::uint64_t step_count = 0;
  // Cleared to freeze the parameter; the optimizer skips it.
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string param_name, Matrix<Scalar> init, int param_rank)
      : name(std::move(param_name)), value(std::move(init)), rank(param_rank) {
    if (rank != 1 && rank != 2) throw ShapeError("parameter rank must be 1 or 2: " + name);
    if (rank == 1 && value.cols() != 1) throw ShapeError("rank-1 parameter must be n x 1: " + name);
    grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
    m = grad;
    v = grad;
  }

  Shape shape() const {
    if (rank == 1) return {value.rows()};
    return {value.rows(), value.cols()};
  }

  void zero_grad() { grad.setZero(); }

  void reset_optimizer() {
    m.setZero();
    v.setZero();
    step_count = 0;
  }
};

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

}  // namespace nhr
