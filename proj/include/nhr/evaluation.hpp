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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nhr/data.hpp"
#include "nhr/models.hpp"
#include "nhr/sampling.hpp"

#include "json.hpp"

namespace nhr {

using ScoreFn = std::function<double(Index user, Index item)>;

// How a hit is credited by hr_at_k. The printed form of the hit-ratio
// formula credits 1/k per hit, which caps HR@10 at 0.1; kIndicator credits
// 1 and is the default. kReciprocalK exists to audit that discrepancy.
enum class HitMode { kIndicator, kReciprocalK };

// Candidates by descending score; equal scores by ascending item id.
std::vector<Index> rank_candidates(std::span<const Index> candidates, std::span<const double> scores);
std::vector<Index> rank_candidates(const ScoreFn& score, Index user, std::span<const Index> candidates);

// 1-based position of `item`; ProtocolError when absent.
std::size_t position_of(std::span<const Index> ranked, Index item);

double hr_at_k(std::span<const Index> ranked, Index test_item, int k, HitMode mode = HitMode::kIndicator);
// 1 / log2(pos + 1) for a hit at 1-based position pos <= k, else 0.
double ndcg_at_k(std::span<const Index> ranked, Index test_item, int k);

struct UserEval {
  Index user = 0;
  std::size_t rank = 0;
  bool hit = false;
  double hr = 0;
  double ndcg = 0;
};

struct EvalReport {
  std::string model;
  int k = 10;
  double hr = 0;
  double ndcg = 0;
  std::size_t users = 0;
  std::string candidates_fingerprint;
  std::vector<UserEval> per_user;
  // Marks rows built on side features, for the improvement column.
  bool hybrid = false;
};

// Scores every candidate list. When `split` is given, each of its evaluable
// users must be present in `candidates`.
EvalReport evaluate(const ScoreFn& score, const EvalCandidates& candidates, int k, const std::string& model_tag,
                    const SplitDataset* split = nullptr, HitMode mode = HitMode::kIndicator);

// Ranks by logit, which orders items exactly as the sigmoid score does.
ScoreFn scorer_fn(const Scorer<float>& model, const FeatureSet* features);

nlohmann::json to_json(const EvalReport& report, bool include_per_user = false);
EvalReport eval_report_from_json(const nlohmann::json& j);

// Plain-text comparison: one row per model with HR@k and NDCG@k, an empty
// labeled ALS row, and the relative improvement of the best hybrid row over
// the best non-hybrid row. Warns in the footer when fingerprints differ.
std::string comparison_table(const std::vector<EvalReport>& reports);

}  // namespace nhr
