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
#include <vector>

#include "nhr/data.hpp"
#include "nhr/rng.hpp"
#include "nhr/tensor.hpp"

namespace nhr {

// Non-personalized popularity: every user gets the same item order.
struct PopRankModel {
  std::vector<std::int64_t> counts;  // per item, over training records
};

PopRankModel poprank_fit(const InteractionLog& train);
// Training count of `item`; 0 for items outside the fitted range.
double poprank_score(const PopRankModel& model, Index user, Index item);

struct BprConfig {
  int dim = 8;
  double lr = 0.01;
  double reg = 0.01;
  int epochs = 30;
  // Sampled (u, i+, j-) triples per epoch, as a multiple of |train|.
  double triples_per_record = 4.0;
  // Factors start at U(-init_scale, init_scale).
  double init_scale = 0.1;

  void validate() const;
};

// Matrix factorization with item bias, x_ui = <p_u, q_i> + b_i.
struct BprModel {
  Matrix<float> user_factors;
  Matrix<float> item_factors;
  Vector<float> item_bias;
};

struct BprFitReport {
  std::vector<double> epoch_mean_loss;
};

// -ln sigmoid(x_ui - x_uj) for one triple.
double bpr_triple_loss(double x_ui, double x_uj);

// SGD on the pairwise loss with L2 regularization, drawing positives from
// training records and negatives uniformly outside positives_by_user.
BprModel bpr_fit(const SplitDataset& split, const BprConfig& cfg, Rng& rng, BprFitReport* report = nullptr);

double bpr_score(const BprModel& model, Index user, Index item);

}  // namespace nhr
