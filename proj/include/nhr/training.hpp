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
#include <memory>
#include <string>
#include <vector>

#include "nhr/data.hpp"
#include "nhr/evaluation.hpp"
#include "nhr/models.hpp"
#include "nhr/ops.hpp"
#include "nhr/sampling.hpp"

namespace nhr {

struct TrainConfig {
  int pf = 8;
  AdamConfig adam;
  std::size_t batch_size = 128;
  // Used instead of batch_size for any model that reads text features.
  std::size_t text_batch_size = 32;
  int negative_ratio = 4;
  int max_epochs = 30;
  // Epochs without a validation HR improvement before stopping.
  int patience = 5;
  std::uint64_t seed = 42;
  int eval_k = 10;
  bool freeze_bodies = false;
  // Count the starting parameters as epoch 0 when picking the best epoch.
  bool score_initial = false;

  void validate() const;
  std::size_t batch_size_for(const Scorer<float>& model) const;
};

struct EpochRecord {
  int epoch = 0;
  double loss_sum = 0;
  double loss_mean = 0;
  double val_hr = 0;
  double val_ndcg = 0;
  double seconds = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  // 0 when the starting parameters were never beaten (score_initial).
  int best_epoch = -1;
  double best_val_hr = 0;
  double initial_val_hr = 0;
  std::string stop_reason;
};

// One JSON object per epoch, then a summary line. Wall-clock time is left
// out so identical runs produce identical files.
void write_train_report(std::ostream& out, const TrainReport& report);
// Per-epoch wall-clock seconds, for logs.
void write_train_timing(std::ostream& out, const TrainReport& report);

// Summed BCE over a batch of instances at the current parameters.
double batch_loss(const Scorer<float>& model, std::span<const TrainingInstance> batch, const FeatureSet* features);

// One minibatch Adam step on the summed BCE. Returns the batch loss.
double train_step(Scorer<float>& model, std::span<const TrainingInstance> batch, const FeatureSet* features,
                  const AdamConfig& adam);

// Epoch loop: fresh negatives, shuffled minibatches, validation HR@k after
// each epoch, best-epoch parameters restored at the end. Without validation
// candidates every epoch runs and the last one is kept.
TrainReport train(Scorer<float>& model, const SplitDataset& split, const FeatureSet* features,
                  const EvalCandidates* validation, const TrainConfig& cfg);

// A model to pretrain. Aux models list the feature tables they consume;
// an empty list means every table in the feature set.
struct ModelDecl {
  std::string name;
  ModelKind kind = ModelKind::kGmf;
  std::vector<std::string> features;
};

std::unique_ptr<Scorer<float>> build_model(const ModelDecl& decl, const SplitDataset& split,
                                           const FeatureSet* features, int pf, Rng& rng);

struct PretrainedModel {
  std::string name;
  std::unique_ptr<Scorer<float>> model;
  TrainReport report;
};

// Trains each declared model from its own Xavier init and Adam state. Model
// k uses seed Rng::derive_seed(cfg.seed, k).
std::vector<PretrainedModel> pretrain_all(const std::vector<ModelDecl>& decls, const SplitDataset& split,
                                          const FeatureSet* features, const EvalCandidates* validation,
                                          const TrainConfig& cfg);

// All weight vectors with entries in {0, step, 2 step, ..., 1} summing to 1,
// in descending lexicographic order. `step` must divide 1.
std::vector<std::vector<double>> simplex_grid(std::size_t components, double step);

struct WeightSearchResult {
  std::vector<double> weights;
  double val_hr = 0;
  std::vector<std::pair<std::vector<double>, double>> grid;
};

// Exhaustive simplex search scored by validation HR@k of the fused model
// before any fine-tuning. Ties prefer the point nearest the uniform weights,
// then the lexicographically smallest vector.
WeightSearchResult search_fusion_weights(const std::vector<const Scorer<float>*>& components,
                                         const EvalCandidates& validation, const FeatureSet* features, double step,
                                         int k = 10);

// train() on a fused model; honours cfg.freeze_bodies.
TrainReport finetune_fused(FusedModel<float>& fused, const SplitDataset& split, const FeatureSet* features,
                           const EvalCandidates* validation, const TrainConfig& cfg);

}  // namespace nhr
