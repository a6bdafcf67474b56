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

#include <cmath>

#include "fixtures.hpp"
#include "nhr/baselines.hpp"
#include "nhr/errors.hpp"
#include "nhr/evaluation.hpp"

namespace nhr {
namespace {

TEST(PopRank, OrdersByTrainingCount) {
  // Item A seen 5 times, B 3, C 1.
  std::string tsv;
  for (int u = 0; u < 5; ++u) tsv += "u" + std::to_string(u) + "\tA\t1\n";
  for (int u = 0; u < 3; ++u) tsv += "u" + std::to_string(u) + "\tB\t2\n";
  tsv += "u0\tC\t3\n";
  const auto log = testing::tsv_log(tsv);
  const auto model = poprank_fit(log);
  const Index a = *log.items.find("A"), b = *log.items.find("B"), c = *log.items.find("C");
  const std::vector<Index> candidates{c, a, b};
  for (Index user : {0, 3}) {
    std::vector<double> scores;
    for (Index i : candidates) scores.push_back(poprank_score(model, user, i));
    EXPECT_EQ(rank_candidates(candidates, scores), (std::vector<Index>{a, b, c}));
  }
  EXPECT_EQ(poprank_score(model, 0, 57), 0.0);
}

TEST(Bpr, EqualScoresGiveLnTwo) {
  EXPECT_NEAR(bpr_triple_loss(0.3, 0.3), std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(bpr_triple_loss(-800, 800)));
}

TEST(Bpr, ScoreIsDotPlusBias) {
  BprModel m;
  m.user_factors = Matrix<float>::Zero(2, 3);
  m.item_factors = Matrix<float>::Zero(4, 3);
  m.item_bias = Vector<float>::Zero(4);
  for (Index u = 0; u < 2; ++u)
    for (Index i = 0; i < 4; ++i) EXPECT_EQ(bpr_score(m, u, i), 0.0);
  m.user_factors.row(1) << 1, 2, 3;
  m.item_factors.row(2) << 1, 1, 1;
  m.item_bias[2] = 0.5;
  EXPECT_NEAR(bpr_score(m, 1, 2), 6.5, 1e-6);
  m.item_bias.setZero();
  m.user_factors *= 2;
  m.item_factors *= 2;
  EXPECT_NEAR(bpr_score(m, 1, 2), 24.0, 1e-5);
  EXPECT_THROW(bpr_score(m, 2, 0), LookupError);
  EXPECT_THROW(bpr_score(m, 0, 4), LookupError);
}

double train_auc(const BprModel& m, const SplitDataset& split) {
  double good = 0, total = 0;
  for (const auto& r : split.train.records)
    for (Index j = 0; j < split.num_items(); ++j) {
      if (split.is_positive(r.user, j)) continue;
      good += bpr_score(m, r.user, r.item) > bpr_score(m, r.user, j) ? 1 : 0;
      total += 1;
    }
  return good / total;
}

// Mean pairwise loss over every (u, i+, j-) training triple.
double full_triple_loss(const BprModel& m, const SplitDataset& split) {
  double loss = 0, total = 0;
  for (const auto& r : split.train.records)
    for (Index j = 0; j < split.num_items(); ++j) {
      if (split.is_positive(r.user, j)) continue;
      loss += bpr_triple_loss(bpr_score(m, r.user, r.item), bpr_score(m, r.user, j));
      total += 1;
    }
  return loss / total;
}

TEST(Bpr, ConvergesOnToyFixture) {
  const auto split = leave_one_out_split(testing::PlantedClusters{}.log());
  BprConfig cfg;
  cfg.epochs = 150;
  Rng rng(5);
  const auto model = bpr_fit(split, cfg, rng);
  EXPECT_GT(train_auc(model, split), 0.9);
}

TEST(Bpr, TripleLossDecreasesOverEpochs) {
  // A fit of e epochs is a prefix of a longer fit with the same seed.
  const auto split = leave_one_out_split(testing::PlantedClusters{}.log());
  std::vector<double> losses;
  for (int e = 1; e <= 30; ++e) {
    BprConfig cfg;
    cfg.epochs = e;
    Rng rng(5);
    losses.push_back(full_triple_loss(bpr_fit(split, cfg, rng), split));
  }
  int regressions = 0;
  for (std::size_t e = 1; e < losses.size(); ++e) regressions += losses[e] > losses[e - 1] ? 1 : 0;
  EXPECT_LE(regressions, 1);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Bpr, Deterministic) {
  const auto split = leave_one_out_split(testing::PlantedClusters{}.log());
  BprConfig cfg;
  cfg.epochs = 3;
  Rng a(8), b(8);
  const auto x = bpr_fit(split, cfg, a), y = bpr_fit(split, cfg, b);
  EXPECT_EQ(x.user_factors, y.user_factors);
  EXPECT_EQ(x.item_factors, y.item_factors);
  EXPECT_EQ(x.item_bias, y.item_bias);
}

TEST(Bpr, RejectsBadConfig) {
  BprConfig cfg;
  cfg.lr = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = BprConfig{};
  cfg.dim = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace nhr
