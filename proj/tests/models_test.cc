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
#include <set>

#include "fixtures.hpp"
#include "nhr/errors.hpp"
#include "nhr/models.hpp"

namespace nhr {
namespace {

using testing::LabeledPair;

struct AuxFixture {
  testing::PlantedClusters pc;
  InteractionLog log = pc.log();
  FeatureSet features;

  AuxFixture() {
    features.tables.push_back(pc.cluster_table(log, Entity::kUser, 4));
    features.tables.push_back(pc.cluster_table(log, Entity::kItem, 4));
    std::map<Index, std::string> docs;
    for (Index i = 0; i < log.num_items; ++i)
      if (i % 3 != 0) docs[i] = "plot words for item " + log.items.raw(i) + " cluster c" + std::to_string(i % 5);
    features.tables.push_back(
        build_text_table(docs, log.num_items, FeatureSpec{"plot", Entity::kItem, FeatureKind::kText, 64, 0, 6}));
  }

  std::vector<FeatureSpec> specs() const {
    std::vector<FeatureSpec> s;
    for (const auto& t : features.tables) s.push_back(t.spec);
    return s;
  }
};

std::vector<LabeledPair> some_pairs(Index users, Index items) {
  std::vector<LabeledPair> pairs;
  for (Index k = 0; k < 6; ++k) pairs.push_back({k % users, (3 * k + 1) % items, static_cast<int>(k % 2)});
  return pairs;
}

TEST(Gmf, ZeroEmbeddingsGiveHalf) {
  Rng rng(1);
  GmfModel<double> m(3, 3, 4, rng);
  m.user_embedding().value.setZero();
  m.item_embedding().value.setZero();
  m.out_weight().value.setOnes();
  m.out_bias().value.setZero();
  EXPECT_EQ(m.predict(Query{0, 1}), 0.5);
}

TEST(Gmf, OrthogonalLatentsGiveHalf) {
  Rng rng(1);
  GmfModel<double> m(2, 2, 2, rng);
  m.user_embedding().value.row(0) << 1, 0;
  m.item_embedding().value.row(1) << 0, 1;
  m.out_bias().value.setZero();
  EXPECT_EQ(m.predict(Query{0, 1}), 0.5);
}

TEST(Gmf, UniformHeadIsDotProduct) {
  Rng rng(2);
  GmfModel<double> m(4, 5, 3, rng);
  m.out_weight().value.setOnes();
  m.out_bias().value.setZero();
  const double dot = m.user_embedding().value.row(2).dot(m.item_embedding().value.row(4));
  EXPECT_NEAR(m.logit(Query{2, 4}), dot, 1e-12);
}

TEST(Gmf, FactorsAreElementwiseProduct) {
  Rng rng(3);
  GmfModel<double> m(4, 5, 3, rng);
  const Vector<double> expected =
      m.user_embedding().value.row(1).cwiseProduct(m.item_embedding().value.row(2)).transpose();
  EXPECT_EQ(m.predictive_factors(Query{1, 2}), expected);
  EXPECT_EQ(m.predictive_factors(Query{1, 2}), m.predictive_factors(Query{1, 2}));
}

TEST(Gmf, OutOfRangeIdIsLookupError) {
  Rng rng(1);
  GmfModel<float> m(3, 3, 4, rng);
  EXPECT_THROW(m.logit(Query{3, 0}), LookupError);
  EXPECT_THROW(m.logit(Query{0, -1}), LookupError);
}

TEST(Mlp, ZeroParametersGiveHalf) {
  Rng rng(1);
  MlpModel<double> m(3, 3, 8, rng);
  for (auto* p : m.parameters()) p->value.setZero();
  for (Index u = 0; u < 3; ++u)
    for (Index i = 0; i < 3; ++i) EXPECT_EQ(m.predict(Query{u, i}), 0.5);
}

TEST(Mlp, TowerShapeForPfEight) {
  Rng rng(1);
  MlpModel<float> m(3, 3, 8, rng);
  EXPECT_EQ(m.user_embedding().value.cols(), 16);
  ASSERT_EQ(m.layers().size(), 3u);
  EXPECT_EQ(m.layers()[0].in(), 32);
  EXPECT_EQ(m.layers()[0].out(), 32);
  EXPECT_EQ(m.layers()[1].out(), 16);
  EXPECT_EQ(m.layers()[2].out(), 8);
  EXPECT_EQ(m.predictive_factors(Query{0, 0}).size(), 8);
}

TEST(Mlp, OutputsInOpenUnitInterval) {
  Rng rng(5);
  MlpModel<float> m(100, 100, 8, rng);
  for (int k = 0; k < 10000; ++k) {
    const double p = m.predict(Query{static_cast<Index>(rng.below(100)), static_cast<Index>(rng.below(100))});
    ASSERT_GT(p, 0.0);
    ASSERT_LT(p, 1.0);
  }
}

TEST(Aux, ColdRowsAreFiniteAndBiasDriven) {
  Rng rng(1);
  FeatureSpec spec{"plot", Entity::kItem, FeatureKind::kText, 32, 4, 128};
  FeatureSet fs;
  fs.tables.push_back(FeatureTable{spec, {FeatureRow{{0, 0, 0, 0}, {0, 0, 0, 0}}}});
  AuxModel<double> m({spec}, 8, rng);
  EXPECT_EQ(m.embeddings()[0].value.cols(), 128);
  const double p = m.predict(Query{0, 0, &fs});
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
  // Pooling yields zeros, so only biases reach the head: zero them all.
  for (auto* param : m.parameters())
    if (param->name.find("bias") != std::string::npos) param->value.setZero();
  EXPECT_EQ(m.predict(Query{0, 0, &fs}), 0.5);
}

TEST(Aux, TokenPermutationInvariant) {
  Rng rng(2);
  FeatureSpec spec{"plot", Entity::kItem, FeatureKind::kText, 50, 5, 6};
  FeatureSet a, b;
  a.tables.push_back(FeatureTable{spec, {FeatureRow{{3, 9, 17, 22, 0}, {1, 1, 1, 1, 0}}}});
  b.tables.push_back(FeatureTable{spec, {FeatureRow{{22, 3, 17, 9, 0}, {1, 1, 1, 1, 0}}}});
  AuxModel<double> m({spec}, 8, rng);
  EXPECT_NEAR(m.logit(Query{0, 0, &a}), m.logit(Query{0, 0, &b}), 1e-12);
}

TEST(Aux, MissingFeaturesIsConfigError) {
  AuxFixture fx;
  Rng rng(1);
  AuxModel<float> m(fx.specs(), 8, rng);
  EXPECT_THROW(m.logit(Query{0, 0, nullptr}), ConfigError);
  FeatureSet partial;
  partial.tables.push_back(fx.features.tables[0]);
  EXPECT_THROW(m.logit(Query{0, 0, &partial}), ConfigError);
}

TEST(GradientCheck, AllModelKinds) {
  AuxFixture fx;
  Rng rng(11);
  GmfModel<double> gmf(8, 10, 8, rng);
  MlpModel<double> mlp(8, 10, 8, rng);
  AuxModel<double> aux(fx.specs(), 8, rng);
  const auto pairs = some_pairs(8, 10);
  for (Scorer<double>* m : std::initializer_list<Scorer<double>*>{&gmf, &mlp, &aux}) {
    const auto r = testing::gradient_check(*m, pairs, &fx.features);
    EXPECT_LT(r.max_rel_error, 1e-4) << kind_name(m->kind()) << " worst " << r.worst;
    EXPECT_LE(r.straddled * 100, r.checked + r.straddled) << kind_name(m->kind());
  }
  auto fused = fuse<double>({&gmf, &mlp, &aux}, {0.5, 0.3, 0.2});
  const auto r = testing::gradient_check(fused, pairs, &fx.features);
  EXPECT_LT(r.max_rel_error, 1e-4) << "fused worst " << r.worst;
  EXPECT_LE(r.straddled * 100, r.checked + r.straddled);
}

TEST(Backward, WithoutForwardIsStateError) {
  Rng rng(1);
  GmfModel<double> m(2, 2, 2, rng);
  ForwardCache<double> cache;
  EXPECT_THROW(m.backward(cache, 1.0), StateError);
}

TEST(Backward, DisjointModelsKeepZeroGrads) {
  Rng rng(1);
  GmfModel<double> first(3, 3, 4, rng), second(3, 3, 4, rng);
  first.zero_grad();
  second.zero_grad();
  ForwardCache<double> cache;
  first.logit(Query{1, 2}, &cache);
  first.backward(cache, 0.7);
  for (auto* p : second.parameters()) EXPECT_EQ(p->grad.cwiseAbs().sum(), 0.0);
  double touched = 0;
  for (auto* p : first.parameters()) touched += p->grad.cwiseAbs().sum();
  EXPECT_GT(touched, 0.0);
}

TEST(Fuse, IdenticalComponentsAtHalfReproduceScore) {
  Rng rng(4);
  GmfModel<double> a(5, 5, 4, rng);
  const auto b = a.clone();
  auto fused = fuse<double>({&a, b.get()}, {0.5, 0.5});
  for (Index u = 0; u < 5; ++u) EXPECT_NEAR(fused.predict(Query{u, 2}), a.predict(Query{u, 2}), 1e-12);
}

TEST(Fuse, DegenerateWeightsReproduceFirstComponent) {
  Rng rng(5);
  GmfModel<double> gmf(5, 6, 4, rng);
  MlpModel<double> mlp(5, 6, 4, rng);
  auto fused = fuse<double>({&gmf, &mlp}, {1.0, 0.0});
  for (Index u = 0; u < 5; ++u)
    for (Index i = 0; i < 6; ++i) EXPECT_NEAR(fused.predict(Query{u, i}), gmf.predict(Query{u, i}), 1e-12);
}

TEST(Fuse, LogitIsWeightedSumOfComponents) {
  Rng rng(6);
  GmfModel<double> gmf(5, 6, 8, rng);
  MlpModel<double> mlp(5, 6, 8, rng);
  const std::vector<double> w{0.3, 0.7};
  auto fused = fuse<double>({&gmf, &mlp}, w);
  EXPECT_EQ(fused.factor_dim(), 16);
  for (Index u = 0; u < 5; ++u)
    for (Index i = 0; i < 6; ++i)
      EXPECT_NEAR(fused.logit(Query{u, i}), w[0] * gmf.logit(Query{u, i}) + w[1] * mlp.logit(Query{u, i}), 1e-12);
}

TEST(Fuse, CopiesComponentsAndResetsOptimizer) {
  Rng rng(7);
  GmfModel<double> gmf(3, 3, 4, rng);
  MlpModel<double> mlp(3, 3, 4, rng);
  gmf.user_embedding().step_count = 9;
  auto fused = fuse<double>({&gmf, &mlp}, {0.5, 0.5});
  gmf.user_embedding().value.setZero();
  EXPECT_GT(fused.component(0).parameters()[2]->value.cwiseAbs().sum(), 0.0);
  for (auto* p : fused.parameters()) EXPECT_EQ(p->step_count, 0u);
  std::set<std::string> names;
  for (auto* p : fused.parameters()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
}

TEST(Fuse, RejectsBadWeightsAndComponents) {
  Rng rng(8);
  GmfModel<double> gmf(3, 3, 4, rng);
  MlpModel<double> mlp(3, 3, 4, rng);
  EXPECT_THROW(fuse<double>({&gmf, &mlp}, {0.7, 0.4}), ConfigError);
  EXPECT_THROW(fuse<double>({&gmf, &mlp}, {1.2, -0.2}), ConfigError);
  EXPECT_THROW(fuse<double>({&gmf, &mlp}, {1.0}), ConfigError);
  EXPECT_THROW(fuse<double>({&gmf}, {1.0}), ConfigError);
  EXPECT_THROW(fuse<double>({&gmf, &gmf}, {0.5, 0.5}), ConfigError);
}

TEST(Fuse, FreezeBodiesLeavesOnlyHeadGradients) {
  Rng rng(9);
  GmfModel<double> gmf(3, 3, 4, rng);
  MlpModel<double> mlp(3, 3, 4, rng);
  auto fused = fuse<double>({&gmf, &mlp}, {0.5, 0.5});
  fused.set_freeze_bodies(true);
  fused.zero_grad();
  ForwardCache<double> cache;
  fused.logit(Query{1, 1}, &cache);
  fused.backward(cache, 0.4);
  for (auto* p : fused.parameters()) {
    const bool head = p->name.rfind("fused.", 0) == 0;
    EXPECT_EQ(p->trainable, head) << p->name;
    if (!head) EXPECT_EQ(p->grad.cwiseAbs().sum(), 0.0) << p->name;
  }
}

TEST(Fuse, NestedHybridOfFourComponents) {
  AuxFixture fx;
  Rng rng(10);
  GmfModel<float> gmf(fx.log.num_users, fx.log.num_items, 8, rng);
  MlpModel<float> mlp(fx.log.num_users, fx.log.num_items, 8, rng);
  AuxModel<float> cat({fx.features.tables[0].spec, fx.features.tables[1].spec}, 8, rng);
  AuxModel<float> text({fx.features.tables[2].spec}, 8, rng);
  auto fused = fuse<float>({&gmf, &mlp, &cat, &text}, {0.25, 0.25, 0.25, 0.25});
  EXPECT_TRUE(fused.uses_text());
  EXPECT_EQ(fused.feature_specs().size(), 3u);
  const double p = fused.predict(Query{1, 2, &fx.features});
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
}

}  // namespace
}  // namespace nhr
