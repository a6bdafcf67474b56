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

#include <set>
#include <sstream>

#include <unsupported/Eigen/SpecialFunctions>

#include "fixtures.hpp"
#include "nhr/errors.hpp"
#include "nhr/sampling.hpp"

namespace nhr {
namespace {

SplitDataset toy_split() { return leave_one_out_split(testing::PlantedClusters{}.log()); }

TEST(SampleEpoch, FourNegativesPerPositive) {
  // 250 users x 6 items, 2 held out each: 1000 training positives.
  testing::PlantedClusters pc;
  pc.users = 250;
  pc.items = 60;
  pc.per_user = 6;
  const auto split = leave_one_out_split(pc.log());
  ASSERT_EQ(split.train.records.size(), 1000u);
  Rng rng(1);
  const auto plan = sample_epoch(split, 4, 128, rng);
  EXPECT_EQ(plan.instances.size(), 5000u);
  std::size_t positives = 0;
  for (const auto& inst : plan.instances) {
    positives += inst.label;
    if (inst.label == 0) EXPECT_FALSE(split.is_positive(inst.user, inst.item));
  }
  EXPECT_EQ(positives, 1000u);
  EXPECT_EQ(plan.num_batches(), 40u);  // 39 full + 1 partial
}

TEST(SampleEpoch, ConsecutiveEpochsDiffer) {
  const auto split = toy_split();
  Rng rng(2);
  const auto a = sample_epoch(split, 4, 128, rng);
  const auto b = sample_epoch(split, 4, 128, rng);
  std::multiset<std::pair<Index, Index>> na, nb;
  for (const auto& i : a.instances)
    if (!i.label) na.insert({i.user, i.item});
  for (const auto& i : b.instances)
    if (!i.label) nb.insert({i.user, i.item});
  EXPECT_NE(na, nb);
}

TEST(SampleEpoch, SameSeedSamePlan) {
  const auto split = toy_split();
  Rng r1(3), r2(3);
  const auto a = sample_epoch(split, 4, 32, r1), b = sample_epoch(split, 4, 32, r2);
  ASSERT_EQ(a.instances.size(), b.instances.size());
  for (std::size_t k = 0; k < a.instances.size(); ++k) {
    EXPECT_EQ(a.instances[k].user, b.instances[k].user);
    EXPECT_EQ(a.instances[k].item, b.instances[k].item);
  }
}

TEST(SampleNegative, NoCollisionsAndUniform) {
  const auto split = toy_split();
  Rng rng(4);
  const Index user = 0;
  std::map<Index, int> counts;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    const Index item = sample_negative(split, user, rng);
    ASSERT_FALSE(split.is_positive(user, item));
    ++counts[item];
  }
  const int eligible = split.num_items() - static_cast<int>(split.positives_by_user[user].size());
  ASSERT_EQ(static_cast<int>(counts.size()), eligible);
  const double expected = static_cast<double>(draws) / eligible;
  double chi2 = 0;
  for (const auto& [item, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double p = Eigen::numext::igammac((eligible - 1) / 2.0, chi2 / 2.0);
  EXPECT_GT(p, 0.01) << "chi2 " << chi2;
}

TEST(SampleNegative, UserWithEverythingIsSamplingError) {
  const auto split = leave_one_out_split(testing::tsv_log("u\ta\t1\nu\tb\t2\nu\tc\t3\n"));
  Rng rng(1);
  EXPECT_THROW(sample_negative(split, 0, rng), SamplingError);
}

TEST(EvalCandidates, HundredNegativesPlusTarget) {
  testing::PlantedClusters pc;
  pc.items = 200;
  pc.clusters = 2;
  pc.per_user = 10;
  const auto split = leave_one_out_split(pc.log());
  Rng rng(5);
  const auto c = sample_eval_candidates(split, 100, rng);
  ASSERT_EQ(c.size(), static_cast<std::size_t>(split.num_users()));
  for (std::size_t r = 0; r < c.size(); ++r) {
    const auto& items = c.items[r];
    ASSERT_EQ(items.size(), 101u);
    EXPECT_EQ(items.back(), split.test_item[c.users[r]]);
    EXPECT_EQ(std::count(items.begin(), items.end(), c.targets[r]), 1);
    EXPECT_EQ(std::set<Index>(items.begin(), items.end()).size(), 101u);
    for (std::size_t j = 0; j + 1 < items.size(); ++j) EXPECT_FALSE(split.is_positive(c.users[r], items[j]));
  }
}

TEST(EvalCandidates, DeterministicAndSeedSensitive) {
  const auto split = toy_split();
  Rng a(6), b(6), other(7);
  const auto x = sample_eval_candidates(split, 10, a);
  const auto y = sample_eval_candidates(split, 10, b);
  const auto z = sample_eval_candidates(split, 10, other);
  EXPECT_EQ(x.items, y.items);
  EXPECT_EQ(x.fingerprint(), y.fingerprint());
  EXPECT_NE(x.fingerprint(), z.fingerprint());
}

TEST(EvalCandidates, ValidationUsesValItem) {
  const auto split = toy_split();
  Rng rng(8);
  const auto c = sample_eval_candidates(split, 5, rng, HeldOut::kValidation);
  for (std::size_t r = 0; r < c.size(); ++r) EXPECT_EQ(c.targets[r], split.val_item[c.users[r]]);
}

TEST(EvalCandidates, TooManyNegativesIsSamplingError) {
  const auto split = toy_split();  // 20 items, 4 positives per user
  Rng rng(1);
  EXPECT_NO_THROW(sample_eval_candidates(split, 16, rng));
  EXPECT_THROW(sample_eval_candidates(split, 17, rng), SamplingError);
}

TEST(EvalCandidates, FileRoundTrip) {
  const auto split = toy_split();
  Rng rng(9);
  const auto c = sample_eval_candidates(split, 10, rng);
  std::ostringstream out;
  write_candidates(out, c);
  std::istringstream in(out.str());
  const auto back = read_candidates(in);
  EXPECT_EQ(back.users, c.users);
  EXPECT_EQ(back.targets, c.targets);
  EXPECT_EQ(back.items, c.items);
  EXPECT_EQ(back.fingerprint(), c.fingerprint());
}

}  // namespace
}  // namespace nhr
