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
#include <iosfwd>
#include <string>
#include <vector>

#include "nhr/data.hpp"
#include "nhr/rng.hpp"

namespace nhr {

struct TrainingInstance {
  Index user = 0;
  Index item = 0;
  std::uint8_t label = 0;
};

struct EpochBatchPlan {
  // Already shuffled.
  std::vector<TrainingInstance> instances;
  std::size_t batch_size = 128;

  std::size_t num_batches() const { return (instances.size() + batch_size - 1) / batch_size; }
};

// Every training record plus `ratio` uniformly drawn negatives per record,
// rejecting items in positives_by_user. Draw a fresh plan each epoch.
EpochBatchPlan sample_epoch(const SplitDataset& split, int ratio, std::size_t batch_size, Rng& rng);

// Uniform negative item for `user` by rejection.
Index sample_negative(const SplitDataset& split, Index user, Rng& rng);

enum class HeldOut { kValidation, kTest };

// Fixed ranking candidates: per evaluated user, `n` distinct negatives
// followed by the held-out target item.
struct EvalCandidates {
  std::vector<Index> users;
  std::vector<Index> targets;
  std::vector<std::vector<Index>> items;

  std::size_t size() const { return users.size(); }
  // Hex FNV-1a digest of (user, items) rows.
  std::string fingerprint() const;
  // Position of `user` in users, or -1.
  std::ptrdiff_t find(Index user) const;
};

EvalCandidates sample_eval_candidates(const SplitDataset& split, int n, Rng& rng, HeldOut which = HeldOut::kTest);

// `user<TAB>item1,item2,...` with the target listed last.
void write_candidates(std::ostream& out, const EvalCandidates& candidates);
EvalCandidates read_candidates(std::istream& in);

}  // namespace nhr
