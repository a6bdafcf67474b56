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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "nhr/ops.hpp"
#include "nhr/rng.hpp"
#include "nhr/tensor.hpp"

namespace nhr {
namespace {

using Vec = Vector<double>;
using Mat = Matrix<double>;

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

TEST(Rng, SameSeedSameStream) {
  Rng a(11), b(11);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(3);
  for (int k = 0; k < 10000; ++k) EXPECT_LT(rng.below(7), 7u);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_NE(Rng::derive_seed(42, 0), Rng::derive_seed(42, 1));
  EXPECT_NE(Rng::derive_seed(42, 0), Rng::derive_seed(43, 0));
  EXPECT_EQ(Rng::derive_seed(42, 5), Rng::derive_seed(42, 5));
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(5);
  std::vector<int> v(50);
  for (int k = 0; k < 50; ++k) v[k] = k;
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < 50; ++k) EXPECT_EQ(sorted[k], k);
}

TEST(XavierInit, Deterministic) {
  Rng a(7), b(7);
  const auto x = xavier_init<float>({4, 4}, a);
  const auto y = xavier_init<float>({4, 4}, b);
  EXPECT_EQ(0, std::memcmp(x.data(), y.data(), sizeof(float) * 16));
}

TEST(XavierInit, VarianceMatchesFanRule) {
  Rng rng(1);
  const auto w = xavier_init<double>({1000, 1000}, rng);
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  const double expected = 2.0 / (1000 + 1000);
  EXPECT_NEAR(var, expected, 0.1 * expected);
}

TEST(XavierInit, BoundsAndRankOne) {
  Rng rng(2);
  const auto w = xavier_init<double>({5}, rng);
  EXPECT_EQ(w.rows(), 5);
  EXPECT_EQ(w.cols(), 1);
  const double a = std::sqrt(6.0 / 6.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), a);
}

TEST(XavierInit, RejectsBadShapes) {
  Rng rng(1);
  EXPECT_THROW(xavier_init<float>({}, rng), ShapeError);
  EXPECT_THROW(xavier_init<float>({2, 0}, rng), ShapeError);
  EXPECT_THROW(xavier_init<float>({2, 2, 2}, rng), ShapeError);
}

TEST(DenseForward, IdentityReluSigmoid) {
  const Mat eye = Mat::Identity(2, 2);
  auto r = dense_forward<double>(eye, Vec::Zero(2), vec({3, -2}), Activation::kRelu);
  EXPECT_EQ(r[0], 3);
  EXPECT_EQ(r[1], 0);

  Mat zeros = Mat::Zero(1, 2);
  auto s = dense_forward<double>(zeros, Vec::Zero(1), vec({5, -9}), Activation::kSigmoid);
  EXPECT_EQ(s[0], 0.5);

  Mat ones = Mat::Ones(1, 2);
  auto i = dense_forward<double>(ones, vec({1}), vec({1, 2}), Activation::kIdentity);
  EXPECT_EQ(i[0], 4);
}

TEST(DenseForward, ShapeMismatchNamesDimensions) {
  const Mat w = Mat::Zero(2, 3);
  try {
    dense_forward<double>(w, Vec::Zero(2), Vec::Zero(4), Activation::kIdentity);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
}

TEST(DenseForward, SigmoidStaysOpen) {
  Mat w(1, 1);
  w(0, 0) = 1000;
  const auto hi = dense_forward<float>(w.cast<float>(), Vector<float>::Zero(1), Vector<float>::Ones(1),
                                       Activation::kSigmoid);
  EXPECT_LT(hi[0], 1.0f);
  const auto lo = dense_forward<float>(w.cast<float>(), Vector<float>::Zero(1), -Vector<float>::Ones(1),
                                       Activation::kSigmoid);
  EXPECT_GT(lo[0], 0.0f);
}

TEST(ElementwiseMul, Examples) {
  const auto p = vec({1, 2, 3});
  EXPECT_EQ(elementwise_mul<double>(p, vec({4, 5, 6})), vec({4, 10, 18}));
  EXPECT_EQ(elementwise_mul<double>(p, Vec::Ones(3)), p);
  EXPECT_EQ(elementwise_mul<double>(p, Vec::Zero(3)), Vec::Zero(3));
  EXPECT_THROW(elementwise_mul<double>(p, Vec::Zero(2)), ShapeError);
}

TEST(EmbeddingLookupAvg, Examples) {
  Mat table(3, 2);
  table << 0, 0, 1, 3, 3, 1;
  const std::vector<std::int32_t> one{1}, twice{1, 1}, both{1, 2};
  const std::vector<std::uint8_t> t1{1}, t2{1, 1}, tf{1, 0}, ff{0, 0};
  EXPECT_EQ(embedding_lookup_avg<double>(table, one, t1), vec({1, 3}));
  EXPECT_EQ(embedding_lookup_avg<double>(table, twice, t2), vec({1, 3}));
  EXPECT_EQ(embedding_lookup_avg<double>(table, both, t2), vec({2, 2}));
  EXPECT_EQ(embedding_lookup_avg<double>(table, both, tf), vec({1, 3}));
  EXPECT_EQ(embedding_lookup_avg<double>(table, both, ff), Vec::Zero(2));
}

TEST(EmbeddingLookupAvg, OutOfRangeIsLookupError) {
  const Mat table = Mat::Zero(3, 2);
  const std::vector<std::int32_t> idx{3};
  const std::vector<std::uint8_t> mask{1};
  EXPECT_THROW(embedding_lookup_avg<double>(table, idx, mask), LookupError);
}

TEST(EmbeddingLookupAvg, BackwardSpreadsEvenly) {
  Mat grad = Mat::Zero(3, 2);
  const std::vector<std::int32_t> idx{1, 2, 0};
  const std::vector<std::uint8_t> mask{1, 1, 0};
  embedding_lookup_avg_backward<double>(grad, idx, mask, vec({2, 4}));
  EXPECT_EQ(grad.row(0).sum(), 0);
  EXPECT_EQ(grad(1, 0), 1);
  EXPECT_EQ(grad(2, 1), 2);
}

TEST(BceLoss, Examples) {
  EXPECT_NEAR(bce_loss(0.5, 1), 0.693147, 1e-6);
  EXPECT_NEAR(bce_loss(1 - 1e-7, 1), 0.0, 1e-6);
  EXPECT_NEAR(bce_loss(0.9, 0), 2.302585, 1e-6);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
}

TEST(DenseBackward, SigmoidBceGradientIsPredMinusLabel) {
  Mat w(1, 2);
  w << 0.3, -0.2;
  const Vec b = vec({0.1});
  const Vec x = vec({1.5, 0.5});
  const auto out = dense_forward<double>(w, b, x, Activation::kSigmoid);
  // dL/dpred for label 1 is -1/pred; through the sigmoid that is pred - 1.
  Mat gw = Mat::Zero(1, 2);
  Vec gb = Vec::Zero(1);
  dense_backward<double>(w, x, out, Activation::kSigmoid, vec({-1.0 / out[0]}), gw,
                         Eigen::Map<Vec>(gb.data(), 1));
  EXPECT_NEAR(gb[0], out[0] - 1, 1e-12);
  EXPECT_NEAR(gw(0, 0), (out[0] - 1) * 1.5, 1e-12);
}

TEST(DenseBackward, MatchesFiniteDifferences) {
  Rng rng(9);
  const Mat w = xavier_init<double>({3, 4}, rng);
  const Vec b = xavier_init<double>({3}, rng);
  const Vec x = xavier_init<double>({4}, rng);
  for (auto act : {Activation::kIdentity, Activation::kSigmoid, Activation::kRelu}) {
    // Loss = sum of outputs.
    const auto out = dense_forward<double>(w, b, x, act);
    Mat gw = Mat::Zero(3, 4);
    Vec gb = Vec::Zero(3);
    const auto dx = dense_backward<double>(w, x, out, act, Vec::Ones(3), gw, Eigen::Map<Vec>(gb.data(), 3));
    const double h = 1e-6;
    for (int c = 0; c < 4; ++c) {
      Vec xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      const double num = (dense_forward<double>(w, b, xp, act).sum() - dense_forward<double>(w, b, xm, act).sum()) /
                         (2 * h);
      EXPECT_NEAR(dx[c], num, 1e-6);
    }
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamConfig cfg;
  Parameter<double> p("p", Mat::Zero(3, 1), 1);
  p.grad << 0.5, -3.0, 1e-4;
  adam_step(p, cfg);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::abs(p.value(k, 0)), cfg.lr, 1e-6);
  EXPECT_LT(p.value(0, 0), 0);
  EXPECT_GT(p.value(1, 0), 0);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  Parameter<double> p("p", Mat::Constant(2, 2, 0.25), 2);
  for (int s = 0; s < 10; ++s) adam_step(p, AdamConfig{});
  EXPECT_EQ(p.value, Mat::Constant(2, 2, 0.25));
}

TEST(Adam, FrozenParameterSkipped) {
  Parameter<double> p("p", Mat::Zero(2, 1), 1);
  p.grad.setOnes();
  p.trainable = false;
  adam_step(p, AdamConfig{});
  EXPECT_EQ(p.value, Mat::Zero(2, 1));
  EXPECT_EQ(p.step_count, 0u);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    Rng rng(4);
    Parameter<float> p("p", xavier_init<float>({4, 3}, rng), 2);
    for (int s = 0; s < 20; ++s) {
      p.grad = xavier_init<float>({4, 3}, rng);
      adam_step(p, AdamConfig{});
    }
    return p.value;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(float) * 12));
}

TEST(Adam, RejectsBadConfigAndNonFinite) {
  Parameter<double> p("p", Mat::Zero(1, 1), 1);
  AdamConfig bad;
  bad.lr = 0;
  EXPECT_THROW(adam_step(p, bad), ConfigError);
  p.grad(0, 0) = std::nan("");
  EXPECT_THROW(adam_step(p, AdamConfig{}), NumericError);
}

}  // namespace
}  // namespace nhr
