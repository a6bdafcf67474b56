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

#include "nhr/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include "nhr/errors.hpp"

namespace nhr {

namespace {

std::size_t eligible_count(const SplitDataset& split, Index user) {
  return static_cast<std::size_t>(split.num_items()) - split.positives_by_user[static_cast<std::size_t>(user)].size();
}

}  // namespace

Index sample_negative(const SplitDataset& split, Index user, Rng& rng) {
  if (eligible_count(split, user) == 0)
    throw SamplingError("user " + std::to_string(user) + " has interacted with every item; no negatives exist");
  while (true) {
    const auto item = static_cast<Index>(rng.below(static_cast<std::uint64_t>(split.num_items())));
    if (!split.is_positive(user, item)) return item;
  }
}

EpochBatchPlan sample_epoch(const SplitDataset& split, int ratio, std::size_t batch_size, Rng& rng) {
  if (ratio < 1) throw ConfigError("negative ratio must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  EpochBatchPlan plan;
  plan.batch_size = batch_size;
  plan.instances.reserve(split.train.records.size() * static_cast<std::size_t>(ratio + 1));
  for (const auto& rec : split.train.records) {
    plan.instances.push_back({rec.user, rec.item, 1});
    for (int k = 0; k < ratio; ++k) plan.instances.push_back({rec.user, sample_negative(split, rec.user, rng), 0});
  }
  rng.shuffle(std::span<TrainingInstance>(plan.instances));
  return plan;
}

std::string EvalCandidates::fingerprint() const {
  std::uint64_t h = fnv1a64("");
  auto mix = [&h](std::int64_t v) {
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff);
    h = fnv1a64(std::string_view(buf, 8), h);
  };
  for (std::size_t r = 0; r < users.size(); ++r) {
    mix(users[r]);
    mix(static_cast<std::int64_t>(items[r].size()));
    for (auto i : items[r]) mix(i);
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::ptrdiff_t EvalCandidates::find(Index user) const {
  auto it = std::lower_bound(users.begin(), users.end(), user);
  if (it == users.end() || *it != user) return -1;
  return it - users.begin();
}

EvalCandidates sample_eval_candidates(const SplitDataset& split, int n, Rng& rng, HeldOut which) {
  if (n < 0) throw ConfigError("candidate count must be non-negative");
  EvalCandidates out;
  for (Index u : split.eval_users()) {
    if (static_cast<std::size_t>(n) > eligible_count(split, u))
      throw SamplingError("user " + std::to_string(u) + ": cannot draw " + std::to_string(n) +
                          " distinct negatives from " + std::to_string(eligible_count(split, u)) + " eligible items");
    const Index target = which == HeldOut::kTest ? split.test_item[static_cast<std::size_t>(u)]
                                                 : split.val_item[static_cast<std::size_t>(u)];
    std::vector<Index> items;
    items.reserve(static_cast<std::size_t>(n) + 1);
    std::unordered_set<Index> taken;
    while (items.size() < static_cast<std::size_t>(n)) {
      const Index item = sample_negative(split, u, rng);
      if (taken.insert(item).second) items.push_back(item);
    }
    items.push_back(target);
    out.users.push_back(u);
    out.targets.push_back(target);
    out.items.push_back(std::move(items));
  }
  return out;
}

void write_candidates(std::ostream& out, const EvalCandidates& candidates) {
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    out << candidates.users[r] << '\t';
    const auto& items = candidates.items[r];
    for (std::size_t k = 0; k < items.size(); ++k) out << (k ? "," : "") << items[k];
    out << '\n';
  }
}

EvalCandidates read_candidates(std::istream& in) {
  EvalCandidates out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const char* what) {
    throw DataError("candidates:" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected user<TAB>items");
    Index user = 0;
    if (std::from_chars(line.data(), line.data() + tab, user).ec != std::errc()) fail("bad user id");
    std::vector<Index> items;
    std::istringstream list(line.substr(tab + 1));
    std::string tok;
    while (std::getline(list, tok, ',')) {
      Index item = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), item);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("bad item id");
      items.push_back(item);
    }
    if (items.empty()) fail("empty candidate list");
    if (!out.users.empty() && user <= out.users.back()) fail("users must be strictly ascending");
    out.users.push_back(user);
    out.targets.push_back(items.back());
    out.items.push_back(std::move(items));
  }
  return out;
}

}  // namespace nhr
