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

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nhr/data.hpp"
#include "nhr/models.hpp"
#include "nhr/ops.hpp"
#include "nhr/rng.hpp"

namespace nhr::testing {

inline InteractionLog tsv_log(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in, InteractionFormat::kTsv, "fixture");
}

// Users are assigned round-robin to `clusters` groups of items. Each user
// sees `per_user` items of its own cluster (distinct, random order), plus
// `noise` items drawn from other clusters, with increasing timestamps.
struct PlantedClusters {
  int users = 50;
  int items = 20;
  int clusters = 5;
  int per_user = 4;
  int noise = 0;
  std::uint64_t seed = 1;

  int cluster_of_user(int u) const { return u % clusters; }
  int cluster_of_item(int i) const { return i % clusters; }

  std::string tsv() const {
    Rng rng(seed);
    std::ostringstream out;
    for (int u = 0; u < users; ++u) {
      std::vector<int> own, other;
      for (int i = 0; i < items; ++i) (cluster_of_item(i) == cluster_of_user(u) ? own : other).push_back(i);
      rng.shuffle(std::span<int>(own));
      rng.shuffle(std::span<int>(other));
      std::vector<int> chosen(own.begin(), own.begin() + std::min<std::size_t>(per_user, own.size()));
      for (int n = 0; n < noise && n < static_cast<int>(other.size()); ++n) chosen.push_back(other[n]);
      rng.shuffle(std::span<int>(chosen));
      for (std::size_t t = 0; t < chosen.size(); ++t)
        out << "u" << u << "\ti" << chosen[t] << '\t' << 1000 + t << '\n';
    }
    return out.str();
  }

  InteractionLog log() const { return tsv_log(tsv()); }

  // Cluster label per dense entity id, as a one-label categorical table.
  FeatureTable cluster_table(const InteractionLog& log, Entity entity, std::int32_t dim) const {
    std::map<Index, std::vector<std::string>> values;
    const auto& ids = entity == Entity::kUser ? log.users : log.items;
    for (Index d = 0; d < ids.size(); ++d) {
      const int raw = std::stoi(ids.raw(d).substr(1));
      const int c = entity == Entity::kUser ? cluster_of_user(raw) : cluster_of_item(raw);
      values[d] = {"c" + std::to_string(c)};
    }
    FeatureSpec spec{entity == Entity::kUser ? "user_cluster" : "item_cluster", entity, FeatureKind::kCategorical,
                     0, 0, dim};
    return build_categorical_table(values, ids.size(), spec, CategoricalVocab::build(values));
  }
};

// Summed BCE over (user, item, label) triples, in 64-bit.
struct LabeledPair {
  Index user;
  Index item;
  int label;
};

inline double pair_loss(const Scorer<double>& model, const std::vector<LabeledPair>& pairs,
                        const FeatureSet* features) {
  double loss = 0;
  for (const auto& p : pairs) loss += bce_loss(model.predict(Query{p.user, p.item, features}), p.label);
  return loss;
}

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst;
  std::size_t checked = 0;
  // Entries whose +-h probe changes which ReLU units are active.
  std::size_t straddled = 0;
};

// Bit pattern of exact zeros in every recorded activation, which for ReLU
// layers is the set of inactive units.
inline void zero_pattern(const ForwardCache<double>& cache, std::vector<bool>& out) {
  for (const auto& a : cache.acts)
    for (Eigen::Index k = 0; k < a.size(); ++k) out.push_back(a[k] == 0.0);
  for (const auto& child : cache.children) zero_pattern(child, out);
}

inline std::vector<bool> relu_pattern(const Scorer<double>& model, const std::vector<LabeledPair>& pairs,
                                      const FeatureSet* features) {
  std::vector<bool> bits;
  for (const auto& p : pairs) {
    ForwardCache<double> cache;
    model.logit(Query{p.user, p.item, features}, &cache);
    zero_pattern(cache, bits);
  }
  return bits;
}

// Analytic gradients of pair_loss against central differences with step h.
// Relative error is |a - n| / max(|a|, |n|); entries where both are below
// `floor` are compared on absolute error against `floor` instead. A central
// difference across a ReLU kink measures neither one-sided derivative, so
// entries whose probes at +h or -h switch any unit on or off are counted in
// `straddled` and not compared.
inline GradCheckResult gradient_check(Scorer<double>& model, const std::vector<LabeledPair>& pairs,
                                      const FeatureSet* features, double h = 1e-3, double floor = 1e-8) {
  model.zero_grad();
  ForwardCache<double> cache;
  for (const auto& p : pairs) {
    const double z = model.logit(Query{p.user, p.item, features}, &cache);
    model.backward(cache, sigmoid(z) - p.label);
  }
  const auto base_pattern = relu_pattern(model, pairs, features);
  GradCheckResult out;
  for (auto* param : model.parameters()) {
    for (Eigen::Index k = 0; k < param->value.size(); ++k) {
      const double a = param->grad.data()[k];
      const double saved = param->value.data()[k];
      param->value.data()[k] = saved + h;
      const double up = pair_loss(model, pairs, features);
      const bool up_same = relu_pattern(model, pairs, features) == base_pattern;
      param->value.data()[k] = saved - h;
      const double down = pair_loss(model, pairs, features);
      const bool down_same = relu_pattern(model, pairs, features) == base_pattern;
      param->value.data()[k] = saved;
      if (!up_same || !down_same) {
        ++out.straddled;
        continue;
      }
      const double n = (up - down) / (2 * h);
      const double scale = std::max(std::abs(a), std::abs(n));
      const double err = scale < floor ? std::abs(a - n) / floor : std::abs(a - n) / scale;
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = param->name + "[" + std::to_string(k) + "] analytic " + std::to_string(a) + " numeric " +
                    std::to_string(n);
      }
    }
  }
  return out;
}

}  // namespace nhr::testing
