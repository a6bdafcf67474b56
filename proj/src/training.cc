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

#include "nhr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "nhr/errors.hpp"
#include "json.hpp"

namespace nhr {

void TrainConfig::validate() const {
  adam.validate();
  if (pf < 1) throw ConfigError("pf must be positive");
  if (batch_size < 1 || text_batch_size < 1) throw ConfigError("batch sizes must be positive");
  if (negative_ratio < 1) throw ConfigError("negative_ratio must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (eval_k < 1) throw ConfigError("k must be >= 1");
}

std::size_t TrainConfig::batch_size_for(const Scorer<float>& model) const {
  return model.uses_text() ? text_batch_size : batch_size;
}

void write_train_report(std::ostream& out, const TrainReport& report) {
  for (const auto& e : report.epochs) {
    nlohmann::json j = {{"epoch", e.epoch},       {"loss_sum", e.loss_sum}, {"loss_mean", e.loss_mean},
                        {"val_hr", e.val_hr},     {"val_ndcg", e.val_ndcg}};
    out << j.dump() << '\n';
  }
  nlohmann::json summary = {{"best_epoch", report.best_epoch},
                             {"best_val_hr", report.best_val_hr},
                             {"initial_val_hr", report.initial_val_hr},
                             {"stop_reason", report.stop_reason}};
  out << summary.dump() << '\n';
}

void write_train_timing(std::ostream& out, const TrainReport& report) {
  for (const auto& e : report.epochs) out << "epoch " << e.epoch << " " << e.seconds << "s\n";
}

double batch_loss(const Scorer<float>& model, std::span<const TrainingInstance> batch, const FeatureSet* features) {
  double loss = 0;
  for (const auto& inst : batch) {
    const double pred = model.predict(Query{inst.user, inst.item, features});
    loss += bce_loss(pred, inst.label);
  }
  return loss;
}

double train_step(Scorer<float>& model, std::span<const TrainingInstance> batch, const FeatureSet* features,
                  const AdamConfig& adam) {
  model.zero_grad();
  double loss = 0;
  ForwardCache<float> cache;
  for (const auto& inst : batch) {
    const float logit = model.logit(Query{inst.user, inst.item, features}, &cache);
    const double pred = sigmoid(static_cast<double>(logit));
    loss += bce_loss(pred, inst.label);
    model.backward(cache, pred - static_cast<double>(inst.label));
  }
  if (!std::isfinite(loss)) throw NumericError("non-finite batch loss");
  for (auto* p : model.parameters()) adam_step(*p, adam);
  return loss;
}

namespace {

std::vector<Matrix<float>> snapshot(Scorer<float>& model) {
  std::vector<Matrix<float>> values;
  for (auto* p : model.parameters()) values.push_back(p->value);
  return values;
}

void restore(Scorer<float>& model, const std::vector<Matrix<float>>& values) {
  auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
}

}  // namespace

TrainReport train(Scorer<float>& model, const SplitDataset& split, const FeatureSet* features,
                  const EvalCandidates* validation, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t batch_size = cfg.batch_size_for(model);
  TrainReport report;
  std::vector<Matrix<float>> best;
  int since_best = 0;
  report.stop_reason = "max_epochs";
  if (cfg.score_initial && validation != nullptr) {
    report.initial_val_hr = evaluate(scorer_fn(model, features), *validation, cfg.eval_k, "validation").hr;
    report.best_epoch = 0;
    report.best_val_hr = report.initial_val_hr;
    best = snapshot(model);
  }

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto plan = sample_epoch(split, cfg.negative_ratio, batch_size, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    const std::span<const TrainingInstance> all(plan.instances);
    for (std::size_t b = 0; b < plan.num_batches(); ++b) {
      const auto batch = all.subspan(b * batch_size, std::min(batch_size, all.size() - b * batch_size));
      try {
        rec.loss_sum += train_step(model, batch, features, cfg.adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (lr " + std::to_string(cfg.adam.lr) + ", epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(b) + ")");
      }
    }
    rec.loss_mean = plan.instances.empty() ? 0.0 : rec.loss_sum / static_cast<double>(plan.instances.size());

    bool improved = true;
    if (validation != nullptr) {
      const auto eval = evaluate(scorer_fn(model, features), *validation, cfg.eval_k, "validation");
      rec.val_hr = eval.hr;
      rec.val_ndcg = eval.ndcg;
      improved = report.best_epoch < 0 || eval.hr > report.best_val_hr;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);

    if (improved) {
      report.best_epoch = epoch;
      report.best_val_hr = rec.val_hr;
      since_best = 0;
      if (validation != nullptr) best = snapshot(model);
    } else if (++since_best >= cfg.patience) {
      report.stop_reason = "early_stop";
      break;
    }
  }
  if (!best.empty()) restore(model, best);
  return report;
}

std::unique_ptr<Scorer<float>> build_model(const ModelDecl& decl, const SplitDataset& split,
                                           const FeatureSet* features, int pf, Rng& rng) {
  switch (decl.kind) {
    case ModelKind::kGmf:
      return std::make_unique<GmfModel<float>>(split.num_users(), split.num_items(), pf, rng);
    case ModelKind::kMlp:
      return std::make_unique<MlpModel<float>>(split.num_users(), split.num_items(), pf, rng);
    case ModelKind::kAux: {
      if (features == nullptr) throw ConfigError("model " + decl.name + ": aux models need feature tables");
      std::vector<FeatureSpec> specs;
      if (decl.features.empty()) {
        for (const auto& t : features->tables) specs.push_back(t.spec);
      } else {
        for (const auto& name : decl.features) specs.push_back(features->at(name).spec);
      }
      return std::make_unique<AuxModel<float>>(std::move(specs), pf, rng);
    }
    default:
      throw ConfigError("model " + decl.name + ": kind " + std::string(kind_name(decl.kind)) +
                        " cannot be pretrained");
  }
}

std::vector<PretrainedModel> pretrain_all(const std::vector<ModelDecl>& decls, const SplitDataset& split,
                                          const FeatureSet* features, const EvalCandidates* validation,
                                          const TrainConfig& cfg) {
  std::vector<PretrainedModel> out;
  for (std::size_t k = 0; k < decls.size(); ++k) {
    Rng init(Rng::derive_seed(cfg.seed, 2 * k));
    PretrainedModel pm;
    pm.name = decls[k].name;
    pm.model = build_model(decls[k], split, features, cfg.pf, init);
    TrainConfig component_cfg = cfg;
    component_cfg.seed = Rng::derive_seed(cfg.seed, 2 * k + 1);
    pm.report = train(*pm.model, split, features, validation, component_cfg);
    out.push_back(std::move(pm));
  }
  return out;
}

std::vector<std::vector<double>> simplex_grid(std::size_t components, double step) {
  if (components < 1) throw ConfigError("simplex_grid: need at least one component");
  if (!(step > 0) || step > 1) throw ConfigError("simplex_grid: step must lie in (0, 1]");
  const auto parts = static_cast<long>(std::llround(1.0 / step));
  if (std::abs(static_cast<double>(parts) * step - 1.0) > 1e-9) throw ConfigError("simplex_grid: step must divide 1");
  std::vector<std::vector<double>> grid;
  std::vector<long> counts(components, 0);
  // Recursive enumeration, largest leading counts first.
  auto fill = [&](auto&& self, std::size_t pos, long remaining) -> void {
    if (pos + 1 == components) {
      counts[pos] = remaining;
      std::vector<double> w(components);
      for (std::size_t c = 0; c < components; ++c) w[c] = static_cast<double>(counts[c]) / static_cast<double>(parts);
      grid.push_back(std::move(w));
      return;
    }
    for (long c = remaining; c >= 0; --c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  fill(fill, 0, parts);
  if (grid.empty()) throw ConfigError("simplex_grid: empty grid");
  return grid;
}

WeightSearchResult search_fusion_weights(const std::vector<const Scorer<float>*>& components,
                                         const EvalCandidates& validation, const FeatureSet* features, double step,
                                         int k) {
  if (components.size() < 2) throw ConfigError("weight search needs at least two components");
  const auto grid = simplex_grid(components.size(), step);

  // Fused-at-init logit = sum_k w_k * logit_k, so component logits are
  // computed once and blended per grid point.
  std::vector<std::vector<std::vector<double>>> logits(components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    logits[c].resize(validation.size());
    for (std::size_t r = 0; r < validation.size(); ++r)
      for (Index item : validation.items[r])
        logits[c][r].push_back(
            static_cast<double>(components[c]->logit(Query{validation.users[r], item, features})));
  }

  const double uniform = 1.0 / static_cast<double>(components.size());
  auto distance = [&](const std::vector<double>& w) {
    double d = 0;
    for (double x : w) d += (x - uniform) * (x - uniform);
    return d;
  };

  WeightSearchResult result;
  bool have_best = false;
  std::vector<double> scores;
  for (const auto& w : grid) {
    double hits = 0;
    for (std::size_t r = 0; r < validation.size(); ++r) {
      const auto& items = validation.items[r];
      scores.assign(items.size(), 0.0);
      for (std::size_t c = 0; c < components.size(); ++c)
        for (std::size_t j = 0; j < items.size(); ++j) scores[j] += w[c] * logits[c][r][j];
      const auto ranked = rank_candidates(items, scores);
      hits += hr_at_k(ranked, validation.targets[r], k);
    }
    const double hr = validation.size() > 0 ? hits / static_cast<double>(validation.size()) : 0.0;
    result.grid.emplace_back(w, hr);
    bool better = !have_best || hr > result.val_hr;
    if (have_best && hr == result.val_hr) {
      const double dw = distance(w), db = distance(result.weights);
      better = dw < db - 1e-12 || (std::abs(dw - db) <= 1e-12 && w < result.weights);
    }
    if (better) {
      result.weights = w;
      result.val_hr = hr;
      have_best = true;
    }
  }
  return result;
}

TrainReport finetune_fused(FusedModel<float>& fused, const SplitDataset& split, const FeatureSet* features,
                           const EvalCandidates* validation, const TrainConfig& cfg) {
  fused.set_freeze_bodies(cfg.freeze_bodies);
  TrainConfig fine = cfg;
  fine.score_initial = true;
  return train(fused, split, features, validation, fine);
}

}  // namespace nhr
