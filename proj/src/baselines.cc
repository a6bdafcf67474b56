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

#include "nhr/baselines.hpp"

#include <cmath>

#include "nhr/errors.hpp"
#include "nhr/ops.hpp"
#include "nhr/sampling.hpp"

namespace nhr {

PopRankModel poprank_fit(const InteractionLog& train) {
  PopRankModel model;
  model.counts.assign(static_cast<std::size_t>(train.num_items), 0);
  for (const auto& r : train.records) ++model.counts[static_cast<std::size_t>(r.item)];
  return model;
}

double poprank_score(const PopRankModel& model, Index, Index item) {
  if (item < 0 || static_cast<std::size_t>(item) >= model.counts.size()) return 0.0;
  return static_cast<double>(model.counts[static_cast<std::size_t>(item)]);
}

void BprConfig::validate() const {
  if (dim < 1) throw ConfigError("bpr: dim must be >= 1");
  if (!(lr > 0) || !(reg > 0)) throw ConfigError("bpr: lr and reg must be positive");
  if (epochs < 0) throw ConfigError("bpr: epochs must be >= 0");
  if (!(triples_per_record > 0)) throw ConfigError("bpr: triples_per_record must be positive");
}

double bpr_triple_loss(double x_ui, double x_uj) {
  // -ln sigmoid(d) = ln(1 + e^-d), evaluated without overflow.
  const double d = x_ui - x_uj;
  return d > 0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d));
}

BprModel bpr_fit(const SplitDataset& split, const BprConfig& cfg, Rng& rng, BprFitReport* report) {
  cfg.validate();
  const Index users = split.num_users();
  const Index items = split.num_items();
  BprModel model;
  model.user_factors.resize(users, cfg.dim);
  model.item_factors.resize(items, cfg.dim);
  for (Eigen::Index k = 0; k < model.user_factors.size(); ++k)
    model.user_factors.data()[k] = static_cast<float>(rng.uniform(-cfg.init_scale, cfg.init_scale));
  for (Eigen::Index k = 0; k < model.item_factors.size(); ++k)
    model.item_factors.data()[k] = static_cast<float>(rng.uniform(-cfg.init_scale, cfg.init_scale));
  model.item_bias = Vector<float>::Zero(items);

  const auto& records = split.train.records;
  if (records.empty()) return model;
  const auto triples = static_cast<std::size_t>(std::ceil(cfg.triples_per_record * static_cast<double>(records.size())));
  const auto lr = static_cast<float>(cfg.lr);
  const auto reg = static_cast<float>(cfg.reg);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0;
    for (std::size_t t = 0; t < triples; ++t) {
      const auto& rec = records[rng.below(records.size())];
      const Index u = rec.user, i = rec.item;
      const Index j = sample_negative(split, u, rng);
      const double x_ui = bpr_score(model, u, i);
      const double x_uj = bpr_score(model, u, j);
      const double loss = bpr_triple_loss(x_ui, x_uj);
      if (!std::isfinite(loss))
        throw NumericError("bpr: non-finite loss at epoch " + std::to_string(epoch) + ", triple " + std::to_string(t) +
                           " (lr " + std::to_string(cfg.lr) + ")");
      loss_sum += loss;
      // d(-ln sigmoid(x))/dx = -sigmoid(-x)
      const auto g = static_cast<float>(sigmoid(-(x_ui - x_uj)));
      const Eigen::RowVectorXf pu = model.user_factors.row(u);
      const Eigen::RowVectorXf qi = model.item_factors.row(i);
      const Eigen::RowVectorXf qj = model.item_factors.row(j);
      model.user_factors.row(u) += lr * (g * (qi - qj) - reg * pu);
      model.item_factors.row(i) += lr * (g * pu - reg * qi);
      model.item_factors.row(j) += lr * (-g * pu - reg * qj);
      model.item_bias[i] += lr * (g - reg * model.item_bias[i]);
      model.item_bias[j] += lr * (-g - reg * model.item_bias[j]);
    }
    if (report != nullptr) report->epoch_mean_loss.push_back(loss_sum / static_cast<double>(triples));
  }
  return model;
}

double bpr_score(const BprModel& model, Index user, Index item) {
  if (user < 0 || user >= model.user_factors.rows() || item < 0 || item >= model.item_factors.rows())
    throw LookupError("bpr: id out of range");
  double acc = model.item_bias[item];
  for (Eigen::Index k = 0; k < model.user_factors.cols(); ++k)
    acc += static_cast<double>(model.user_factors(user, k)) * static_cast<double>(model.item_factors(item, k));
  return acc;
}

}  // namespace nhr
