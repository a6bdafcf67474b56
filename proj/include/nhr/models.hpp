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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nhr/data.hpp"
#include "nhr/ops.hpp"
#include "nhr/rng.hpp"
#include "nhr/tensor.hpp"

namespace nhr {

enum class ModelKind : std::uint32_t {
  kGmf = 1,
  kMlp = 2,
  kAux = 3,
  kFused = 4,
  kPopRank = 5,
  kBpr = 6,
};

std::string_view kind_name(ModelKind kind);

// One (user, item) pair to score. Aux-bearing models read side features
// from `features`.
struct Query {
  Index user = 0;
  Index item = 0;
  const FeatureSet* features = nullptr;
};

// Intermediates recorded by a forward pass and consumed by backward().
template <typename Scalar>
struct ForwardCache {
  Query query;
  std::vector<Vector<Scalar>> acts;
  std::vector<ForwardCache> children;
  Vector<Scalar> factors;
  bool ready = false;
};

// Common shape of every neural scorer: a body producing the predictive
// factors (final hidden layer) and a sigmoid output head over them,
//   score = sigmoid(out_weight . factors + out_bias).
template <typename Scalar>
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ModelKind kind() const = 0;
  virtual std::unique_ptr<Scorer> clone() const = 0;
  virtual bool uses_text() const { return false; }
  virtual std::vector<FeatureSpec> feature_specs() const { return {}; }
  virtual Index num_users() const { return 0; }
  virtual Index num_items() const { return 0; }

  // The final hidden-layer activation. Records intermediates into `cache`
  // when given.
  virtual Vector<Scalar> predictive_factors(const Query& q, ForwardCache<Scalar>* cache = nullptr) const = 0;

  int factor_dim() const { return static_cast<int>(out_weight_.value.cols()); }

  // Pre-sigmoid output; ranking by logit equals ranking by score.
  Scalar logit(const Query& q, ForwardCache<Scalar>* cache = nullptr) const;
  double predict(const Query& q) const { return sigmoid(static_cast<double>(logit(q))); }

  // Accumulates d(loss)/d(param) given d(loss)/d(logit). Requires a cache
  // filled by logit(). For sigmoid + BCE, dlogit = pred - label.
  void backward(const ForwardCache<Scalar>& cache, double dlogit);

  // Output head first, then body parameters in a fixed order.
  ParameterList<Scalar> parameters();
  std::vector<const Parameter<Scalar>*> parameters() const;
  void zero_grad();

  Parameter<Scalar>& out_weight() { return out_weight_; }
  Parameter<Scalar>& out_bias() { return out_bias_; }
  const Parameter<Scalar>& out_weight() const { return out_weight_; }
  const Parameter<Scalar>& out_bias() const { return out_bias_; }

  // Adds `prefix` to every parameter name.
  void prefix_names(const std::string& prefix);

  // Body part of backward(): propagates d(loss)/d(factors).
  virtual void backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) = 0;

 protected:
  Scorer() = default;
  Scorer(const Scorer&) = default;
  Scorer& operator=(const Scorer&) = default;

  void init_head(const std::string& prefix, int pf, Rng& rng);
  virtual ParameterList<Scalar> body_parameters() = 0;

  Parameter<Scalar> out_weight_;
  Parameter<Scalar> out_bias_;
};

template <typename Scalar>
struct DenseLayer {
  Parameter<Scalar> weight;  // [out x in]
  Parameter<Scalar> bias;    // [out]
  Activation act = Activation::kRelu;

  DenseLayer() = default;
  DenseLayer(const std::string& name, int in, int out, Activation activation, Rng& rng);
  int in() const { return static_cast<int>(weight.value.cols()); }
  int out() const { return static_cast<int>(weight.value.rows()); }
  Vector<Scalar> forward(VectorRef<Scalar> x) const;
  Vector<Scalar> backward(VectorRef<Scalar> x, VectorRef<Scalar> out, VectorRef<Scalar> dout);
};

// Generalized matrix factorization: factors = p_u (.) q_i with embedding
// width equal to the predictive factors.
template <typename Scalar>
class GmfModel final : public Scorer<Scalar> {
 public:
  GmfModel(Index num_users, Index num_items, int pf, Rng& rng);

  ModelKind kind() const override { return ModelKind::kGmf; }
  std::unique_ptr<Scorer<Scalar>> clone() const override { return std::make_unique<GmfModel>(*this); }
  Index num_users() const override { return static_cast<Index>(user_embedding_.value.rows()); }
  Index num_items() const override { return static_cast<Index>(item_embedding_.value.rows()); }
  Vector<Scalar> predictive_factors(const Query& q, ForwardCache<Scalar>* cache = nullptr) const override;
  void backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) override;

  Parameter<Scalar>& user_embedding() { return user_embedding_; }
  Parameter<Scalar>& item_embedding() { return item_embedding_; }

 protected:
  ParameterList<Scalar> body_parameters() override { return {&user_embedding_, &item_embedding_}; }

 private:
  Parameter<Scalar> user_embedding_;
  Parameter<Scalar> item_embedding_;
};

// Interaction tower: concat(p_u, q_i) of width 4pf through ReLU layers of
// widths 4pf, 2pf, pf.
template <typename Scalar>
class MlpModel final : public Scorer<Scalar> {
 public:
  MlpModel(Index num_users, Index num_items, int pf, Rng& rng);

  ModelKind kind() const override { return ModelKind::kMlp; }
  std::unique_ptr<Scorer<Scalar>> clone() const override { return std::make_unique<MlpModel>(*this); }
  Index num_users() const override { return static_cast<Index>(user_embedding_.value.rows()); }
  Index num_items() const override { return static_cast<Index>(item_embedding_.value.rows()); }
  Vector<Scalar> predictive_factors(const Query& q, ForwardCache<Scalar>* cache = nullptr) const override;
  void backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) override;

  Parameter<Scalar>& user_embedding() { return user_embedding_; }
  Parameter<Scalar>& item_embedding() { return item_embedding_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }

 protected:
  ParameterList<Scalar> body_parameters() override;

 private:
  Parameter<Scalar> user_embedding_;
  Parameter<Scalar> item_embedding_;
  std::vector<DenseLayer<Scalar>> layers_;
};

// Side-feature tower. Each declared feature is embedded and average-pooled
// over its masked positions; pooled vectors are concatenated in declaration
// order and passed through ReLU layers of widths 2pf, pf. Interaction ids
// are not used, so cold entities still get a score.
template <typename Scalar>
class AuxModel final : public Scorer<Scalar> {
 public:
  AuxModel(std::vector<FeatureSpec> specs, int pf, Rng& rng);

  ModelKind kind() const override { return ModelKind::kAux; }
  std::unique_ptr<Scorer<Scalar>> clone() const override { return std::make_unique<AuxModel>(*this); }
  bool uses_text() const override;
  std::vector<FeatureSpec> feature_specs() const override { return specs_; }
  Vector<Scalar> predictive_factors(const Query& q, ForwardCache<Scalar>* cache = nullptr) const override;
  void backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) override;

  // Scores one row per declared feature, in declaration order.
  Scalar logit_from_rows(const std::vector<const FeatureRow*>& rows) const;

  std::vector<Parameter<Scalar>>& embeddings() { return embeddings_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }

 protected:
  ParameterList<Scalar> body_parameters() override;

 private:
  std::vector<const FeatureRow*> rows_for(const Query& q) const;
  Vector<Scalar> factors_from_rows(const std::vector<const FeatureRow*>& rows, ForwardCache<Scalar>* cache) const;

  std::vector<FeatureSpec> specs_;
  std::vector<Parameter<Scalar>> embeddings_;
  std::vector<DenseLayer<Scalar>> layers_;
};

// Ensemble of pre-trained scorers joined at their predictive factors:
// factors = concat(f_1, ..., f_n), output head initialized to
// [a_1 w_1, ..., a_n w_n] with bias sum(a_k b_k).
template <typename Scalar>
class FusedModel final : public Scorer<Scalar> {
 public:
  FusedModel(const FusedModel& other);
  FusedModel& operator=(const FusedModel&) = delete;

  ModelKind kind() const override { return ModelKind::kFused; }
  std::unique_ptr<Scorer<Scalar>> clone() const override { return std::make_unique<FusedModel>(*this); }
  bool uses_text() const override;
  std::vector<FeatureSpec> feature_specs() const override;
  Index num_users() const override;
  Index num_items() const override;
  Vector<Scalar> predictive_factors(const Query& q, ForwardCache<Scalar>* cache = nullptr) const override;
  void backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) override;

  const std::vector<double>& weights() const { return weights_; }
  std::size_t num_components() const { return components_.size(); }
  const Scorer<Scalar>& component(std::size_t k) const { return *components_.at(k); }
  Scorer<Scalar>& component(std::size_t k) { return *components_.at(k); }

  // Freezes every component parameter so only the fused head trains.
  void set_freeze_bodies(bool freeze);
  bool freeze_bodies() const { return freeze_bodies_; }

  // Reassembles a fused model from already-renamed components (checkpoint
  // loading); the head is left for the caller to overwrite.
  static FusedModel assemble(std::vector<std::unique_ptr<Scorer<Scalar>>> components, std::vector<double> weights);

 protected:
  ParameterList<Scalar> body_parameters() override;

 private:
  FusedModel() = default;
  template <typename S>
  friend FusedModel<S> fuse(const std::vector<const Scorer<S>*>& components, const std::vector<double>& weights);

  std::vector<std::unique_ptr<Scorer<Scalar>>> components_;
  std::vector<double> weights_;
  bool freeze_bodies_ = false;
};

// Tolerance on sum(weights) == 1.
inline constexpr double kWeightSumTolerance = 1e-9;

// Copies the components (embeddings and towers), resets optimizer state, and
// builds the weighted output head. Throws ConfigError for fewer than two
// components, a length mismatch, negative weights, a weight sum off 1, or the
// same component object passed twice.
template <typename Scalar>
FusedModel<Scalar> fuse(const std::vector<const Scorer<Scalar>*>& components, const std::vector<double>& weights);

// Same name, entity, kind, vocabulary, length, and embedding width.
bool same_layout(const FeatureSpec& a, const FeatureSpec& b);

extern template class Scorer<float>;
extern template class Scorer<double>;
extern template struct DenseLayer<float>;
extern template struct DenseLayer<double>;
extern template class GmfModel<float>;
extern template class GmfModel<double>;
extern template class MlpModel<float>;
extern template class MlpModel<double>;
extern template class AuxModel<float>;
extern template class AuxModel<double>;
extern template class FusedModel<float>;
extern template class FusedModel<double>;
extern template FusedModel<float> fuse(const std::vector<const Scorer<float>*>&, const std::vector<double>&);
extern template FusedModel<double> fuse(const std::vector<const Scorer<double>*>&, const std::vector<double>&);

}  // namespace nhr
