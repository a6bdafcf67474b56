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

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "nhr/errors.hpp"
#include "nhr/rng.hpp"
#include "nhr/tensor.hpp"

namespace nhr {

enum class Activation { kIdentity, kRelu, kSigmoid };

// Probability clamp applied before taking logarithms in the loss.
inline constexpr double kProbabilityEpsilon = 1e-7;

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Binary cross entropy of one instance; pred is clamped into [eps, 1 - eps].
double bce_loss(double pred, int label);

// Uniform Xavier initialization: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
// For a [rows x cols] matrix fan_in = cols and fan_out = rows; for a rank-1
// shape [n], fan_in = n and fan_out = 1. Values are drawn in row-major order.
template <typename Scalar>
Matrix<Scalar> xavier_init(const Shape& shape, Rng& rng) {
  if (shape.empty() || shape.size() > 2) throw ShapeError("xavier_init: shape must have rank 1 or 2");
  for (auto d : shape)
    if (d <= 0) throw ShapeError("xavier_init: dimensions must be positive");
  const std::int64_t rows = shape[0];
  const std::int64_t cols = shape.size() == 2 ? shape[1] : 1;
  const double fan_in = shape.size() == 2 ? static_cast<double>(cols) : static_cast<double>(rows);
  const double fan_out = shape.size() == 2 ? static_cast<double>(rows) : 1.0;
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix<Scalar> out(rows, cols);
  for (std::int64_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<Scalar>(rng.uniform(-a, a));
  return out;
}

namespace detail {

inline double activate(double x, Activation act) {
  switch (act) {
    case Activation::kRelu:
      return x > 0 ? x : 0.0;
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

// Keeps a sigmoid output strictly inside (0, 1) after rounding to Scalar.
template <typename Scalar>
Scalar open_unit(Scalar p) {
  const Scalar lo = std::numeric_limits<Scalar>::denorm_min();
  const Scalar hi = std::nextafter(Scalar(1), Scalar(0));
  return p < lo ? lo : (p > hi ? hi : p);
}

}  // namespace detail

// act(W x + b) with 64-bit accumulation.
template <typename Scalar>
Vector<Scalar> dense_forward(const Matrix<Scalar>& W, VectorRef<Scalar> b, VectorRef<Scalar> x,
                             Activation act) {
  if (W.cols() != x.size() || W.rows() != b.size())
    throw ShapeError("dense_forward: W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                     ", b has " + std::to_string(b.size()) + ", x has " + std::to_string(x.size()));
  Vector<Scalar> out(W.rows());
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    double acc = static_cast<double>(b[r]);
    const Scalar* row = W.data() + r * W.cols();
    for (Eigen::Index c = 0; c < W.cols(); ++c) acc += static_cast<double>(row[c]) * static_cast<double>(x[c]);
    out[r] = static_cast<Scalar>(detail::activate(acc, act));
    if (act == Activation::kSigmoid) out[r] = detail::open_unit(out[r]);
  }
  return out;
}

// Accumulates dL/dW and dL/db for one dense layer and returns dL/dx.
// `out` is the post-activation output recorded by dense_forward.
template <typename Scalar>
Vector<Scalar> dense_backward(const Matrix<Scalar>& W, VectorRef<Scalar> x, VectorRef<Scalar> out,
                              Activation act, VectorRef<Scalar> dout, Matrix<Scalar>& grad_W,
                              Eigen::Map<Vector<Scalar>> grad_b) {
  Vector<Scalar> delta(out.size());
  for (Eigen::Index r = 0; r < out.size(); ++r) {
    switch (act) {
      case Activation::kRelu:
        delta[r] = out[r] > 0 ? dout[r] : Scalar(0);
        break;
      case Activation::kSigmoid:
        delta[r] = dout[r] * out[r] * (Scalar(1) - out[r]);
        break;
      case Activation::kIdentity:
        delta[r] = dout[r];
        break;
    }
  }
  grad_W.noalias() += delta * x.transpose();
  grad_b += delta;
  Vector<Scalar> dx = Vector<Scalar>::Zero(x.size());
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    if (delta[r] == Scalar(0)) continue;
    dx.noalias() += W.row(r).transpose() * delta[r];
  }
  return dx;
}

template <typename Scalar>
Vector<Scalar> elementwise_mul(VectorRef<Scalar> p, VectorRef<Scalar> q) {
  if (p.size() != q.size())
    throw ShapeError("elementwise_mul: sizes " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  return p.cwiseProduct(q);
}

// Mean of the table rows selected by masked-true positions; the zero vector
// when nothing is selected.
template <typename Scalar>
Vector<Scalar> embedding_lookup_avg(const Matrix<Scalar>& table, std::span<const std::int32_t> indices,
                                    std::span<const std::uint8_t> mask) {
  if (indices.size() != mask.size()) throw ShapeError("embedding_lookup_avg: indices and mask lengths differ");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(table.cols());
  std::size_t count = 0;
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (!mask[t]) continue;
    const auto idx = indices[t];
    if (idx < 0 || idx >= table.rows())
      throw LookupError("embedding index " + std::to_string(idx) + " outside [0, " + std::to_string(table.rows()) +
                        ")");
    acc += table.row(idx).transpose().template cast<double>();
    ++count;
  }
  if (count > 0) acc /= static_cast<double>(count);
  return acc.cast<Scalar>();
}

template <typename Scalar>
void embedding_lookup_avg_backward(Matrix<Scalar>& grad_table, std::span<const std::int32_t> indices,
                                   std::span<const std::uint8_t> mask, VectorRef<Scalar> dout) {
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) return;
  const Scalar scale = Scalar(1) / static_cast<Scalar>(count);
  for (std::size_t t = 0; t < indices.size(); ++t)
    if (mask[t]) grad_table.row(indices[t]) += scale * dout.transpose();
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// One bias-corrected Adam update from the accumulated gradient. Gradients
// are left in place; callers zero them explicitly.
template <typename Scalar>
void adam_step(Parameter<Scalar>& p, const AdamConfig& cfg) {
  cfg.validate();
  if (!p.trainable) return;
  ++p.step_count;
  const double t = static_cast<double>(p.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  Scalar* value = p.value.data();
  const Scalar* grad = p.grad.data();
  Scalar* m = p.m.data();
  Scalar* v = p.v.data();
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    const double g = grad[i];
    if (g == 0 && m[i] == 0 && v[i] == 0) continue;
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<Scalar>(mi);
    v[i] = static_cast<Scalar>(vi);
    const double update = cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
    value[i] = static_cast<Scalar>(value[i] - update);
    if (!std::isfinite(static_cast<double>(value[i])))
      throw NumericError("adam_step: non-finite value in " + p.name);
  }
}

}  // namespace nhr
