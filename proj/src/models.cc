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

#include "nhr/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nhr/errors.hpp"

namespace nhr {

std::string_view kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGmf:
      return "gmf";
    case ModelKind::kMlp:
      return "mlp";
    case ModelKind::kAux:
      return "aux";
    case ModelKind::kFused:
      return "fused";
    case ModelKind::kPopRank:
      return "poprank";
    case ModelKind::kBpr:
      return "bpr";
  }
  return "unknown";
}

bool same_layout(const FeatureSpec& a, const FeatureSpec& b) {
  return a.name == b.name && a.entity == b.entity && a.kind == b.kind && a.vocab_size == b.vocab_size &&
         a.input_length == b.input_length && a.embedding_dim == b.embedding_dim;
}

namespace {

void check_id(Index id, Index bound, const char* what) {
  if (id < 0 || id >= bound)
    throw LookupError(std::string(what) + " id " + std::to_string(id) + " outside [0, " + std::to_string(bound) + ")");
}

template <typename Scalar>
Parameter<Scalar> zeros(const std::string& name, Eigen::Index n) {
  return Parameter<Scalar>(name, Matrix<Scalar>::Zero(n, 1), 1);
}

}  // namespace

// ---- Scorer --------------------------------------------------------------

template <typename Scalar>
void Scorer<Scalar>::init_head(const std::string& prefix, int pf, Rng& rng) {
  if (pf < 1) throw ConfigError("predictive factors must be positive");
  out_weight_ = Parameter<Scalar>(prefix + "out_weight", xavier_init<Scalar>({1, pf}, rng), 2);
  out_bias_ = zeros<Scalar>(prefix + "out_bias", 1);
}

template <typename Scalar>
Scalar Scorer<Scalar>::logit(const Query& q, ForwardCache<Scalar>* cache) const {
  Vector<Scalar> factors = predictive_factors(q, cache);
  if (factors.size() != out_weight_.value.cols()) throw ShapeError("predictive factors do not match output head");
  double acc = static_cast<double>(out_bias_.value(0, 0));
  for (Eigen::Index k = 0; k < factors.size(); ++k)
    acc += static_cast<double>(out_weight_.value(0, k)) * static_cast<double>(factors[k]);
  if (cache != nullptr) {
    cache->query = q;
    cache->factors = std::move(factors);
    cache->ready = true;
  }
  return static_cast<Scalar>(acc);
}

template <typename Scalar>
void Scorer<Scalar>::backward(const ForwardCache<Scalar>& cache, double dlogit) {
  if (!cache.ready) throw StateError("backward called without a recorded forward pass");
  const auto d = static_cast<Scalar>(dlogit);
  out_weight_.grad.row(0) += d * cache.factors.transpose();
  out_bias_.grad(0, 0) += d;
  Vector<Scalar> dfactors = d * out_weight_.value.row(0).transpose();
  backward_factors(cache, dfactors);
}

template <typename Scalar>
ParameterList<Scalar> Scorer<Scalar>::parameters() {
  ParameterList<Scalar> out{&out_weight_, &out_bias_};
  for (auto* p : body_parameters()) out.push_back(p);
  return out;
}

template <typename Scalar>
std::vector<const Parameter<Scalar>*> Scorer<Scalar>::parameters() const {
  auto mutable_list = const_cast<Scorer*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

template <typename Scalar>
void Scorer<Scalar>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename Scalar>
void Scorer<Scalar>::prefix_names(const std::string& prefix) {
  for (auto* p : parameters()) p->name = prefix + p->name;
}

// ---- DenseLayer ----------------------------------------------------------

template <typename Scalar>
DenseLayer<Scalar>::DenseLayer(const std::string& name, int in, int out, Activation activation, Rng& rng)
    : weight(name + ".weight", xavier_init<Scalar>({out, in}, rng), 2),
      bias(zeros<Scalar>(name + ".bias", out)),
      act(activation) {}

template <typename Scalar>
Vector<Scalar> DenseLayer<Scalar>::forward(VectorRef<Scalar> x) const {
  return dense_forward<Scalar>(weight.value, flat(bias.value), x, act);
}

template <typename Scalar>
Vector<Scalar> DenseLayer<Scalar>::backward(VectorRef<Scalar> x, VectorRef<Scalar> out, VectorRef<Scalar> dout) {
  return dense_backward<Scalar>(weight.value, x, out, act, dout, weight.grad, flat(bias.grad));
}

// ---- GMF -----------------------------------------------------------------

template <typename Scalar>
GmfModel<Scalar>::GmfModel(Index num_users, Index num_items, int pf, Rng& rng) {
  if (num_users < 1 || num_items < 1) throw ConfigError("gmf: need at least one user and one item");
  if (pf < 1) throw ConfigError("predictive factors must be positive");
  user_embedding_ = Parameter<Scalar>("gmf.user_embedding", xavier_init<Scalar>({num_users, pf}, rng), 2);
  item_embedding_ = Parameter<Scalar>("gmf.item_embedding", xavier_init<Scalar>({num_items, pf}, rng), 2);
  this->init_head("gmf.", pf, rng);
}

template <typename Scalar>
Vector<Scalar> GmfModel<Scalar>::predictive_factors(const Query& q, ForwardCache<Scalar>*) const {
  check_id(q.user, num_users(), "user");
  check_id(q.item, num_items(), "item");
  return elementwise_mul<Scalar>(user_embedding_.value.row(q.user).transpose(),
                                 item_embedding_.value.row(q.item).transpose());
}

template <typename Scalar>
void GmfModel<Scalar>::backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) {
  const Index u = cache.query.user;
  const Index i = cache.query.item;
  user_embedding_.grad.row(u) += dfactors.cwiseProduct(item_embedding_.value.row(i).transpose()).transpose();
  item_embedding_.grad.row(i) += dfactors.cwiseProduct(user_embedding_.value.row(u).transpose()).transpose();
}

// ---- MLP -----------------------------------------------------------------

template <typename Scalar>
MlpModel<Scalar>::MlpModel(Index num_users, Index num_items, int pf, Rng& rng) {
  if (num_users < 1 || num_items < 1) throw ConfigError("mlp: need at least one user and one item");
  if (pf < 1) throw ConfigError("predictive factors must be positive");
  user_embedding_ = Parameter<Scalar>("mlp.user_embedding", xavier_init<Scalar>({num_users, 2 * pf}, rng), 2);
  item_embedding_ = Parameter<Scalar>("mlp.item_embedding", xavier_init<Scalar>({num_items, 2 * pf}, rng), 2);
  layers_.emplace_back("mlp.layer0", 4 * pf, 4 * pf, Activation::kRelu, rng);
  layers_.emplace_back("mlp.layer1", 4 * pf, 2 * pf, Activation::kRelu, rng);
  layers_.emplace_back("mlp.layer2", 2 * pf, pf, Activation::kRelu, rng);
  this->init_head("mlp.", pf, rng);
}

template <typename Scalar>
ParameterList<Scalar> MlpModel<Scalar>::body_parameters() {
  ParameterList<Scalar> out{&user_embedding_, &item_embedding_};
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

template <typename Scalar>
Vector<Scalar> MlpModel<Scalar>::predictive_factors(const Query& q, ForwardCache<Scalar>* cache) const {
  check_id(q.user, num_users(), "user");
  check_id(q.item, num_items(), "item");
  const auto e = user_embedding_.value.cols();
  Vector<Scalar> x(2 * e);
  x.head(e) = user_embedding_.value.row(q.user).transpose();
  x.tail(e) = item_embedding_.value.row(q.item).transpose();
  if (cache != nullptr) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  for (const auto& layer : layers_) {
    x = layer.forward(x);
    if (cache != nullptr) cache->acts.push_back(x);
  }
  return x;
}

template <typename Scalar>
void MlpModel<Scalar>::backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) {
  if (cache.acts.size() != layers_.size() + 1) throw StateError("mlp: cache does not hold a forward pass");
  Vector<Scalar> d = dfactors;
  for (std::size_t l = layers_.size(); l-- > 0;) d = layers_[l].backward(cache.acts[l], cache.acts[l + 1], d);
  const auto e = user_embedding_.value.cols();
  user_embedding_.grad.row(cache.query.user) += d.head(e).transpose();
  item_embedding_.grad.row(cache.query.item) += d.tail(e).transpose();
}

// ---- Aux -----------------------------------------------------------------

template <typename Scalar>
AuxModel<Scalar>::AuxModel(std::vector<FeatureSpec> specs, int pf, Rng& rng) : specs_(std::move(specs)) {
  if (specs_.empty()) throw ConfigError("aux: at least one feature spec is required");
  if (pf < 1) throw ConfigError("predictive factors must be positive");
  std::set<std::string> names;
  int width = 0;
  for (const auto& spec : specs_) {
    spec.validate();
    if (!names.insert(spec.name).second) throw ConfigError("aux: duplicate feature " + spec.name);
    embeddings_.emplace_back("aux.embedding." + spec.name,
                             xavier_init<Scalar>({spec.vocab_size, spec.embedding_dim}, rng), 2);
    width += spec.embedding_dim;
  }
  layers_.emplace_back("aux.layer0", width, 2 * pf, Activation::kRelu, rng);
  layers_.emplace_back("aux.layer1", 2 * pf, pf, Activation::kRelu, rng);
  this->init_head("aux.", pf, rng);
}

template <typename Scalar>
bool AuxModel<Scalar>::uses_text() const {
  return std::any_of(specs_.begin(), specs_.end(), [](const auto& s) { return s.kind == FeatureKind::kText; });
}

template <typename Scalar>
ParameterList<Scalar> AuxModel<Scalar>::body_parameters() {
  ParameterList<Scalar> out;
  for (auto& e : embeddings_) out.push_back(&e);
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

template <typename Scalar>
std::vector<const FeatureRow*> AuxModel<Scalar>::rows_for(const Query& q) const {
  if (q.features == nullptr) throw ConfigError("aux: query carries no feature tables");
  std::vector<const FeatureRow*> rows;
  rows.reserve(specs_.size());
  for (const auto& spec : specs_) {
    const auto& table = q.features->at(spec.name);
    if (!same_layout(table.spec, spec)) throw ConfigError("aux: feature table " + spec.name + " has another layout");
    rows.push_back(&table.row(spec.entity == Entity::kUser ? q.user : q.item));
  }
  return rows;
}

template <typename Scalar>
Vector<Scalar> AuxModel<Scalar>::factors_from_rows(const std::vector<const FeatureRow*>& rows,
                                                   ForwardCache<Scalar>* cache) const {
  if (rows.size() != specs_.size()) throw ShapeError("aux: expected one row per feature");
  Eigen::Index width = 0;
  for (const auto& spec : specs_) width += spec.embedding_dim;
  Vector<Scalar> x(width);
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    const auto& row = *rows[k];
    if (static_cast<std::int32_t>(row.indices.size()) != specs_[k].input_length)
      throw ShapeError("aux: row for " + specs_[k].name + " has the wrong length");
    x.segment(offset, specs_[k].embedding_dim) =
        embedding_lookup_avg<Scalar>(embeddings_[k].value, row.indices, row.mask);
    offset += specs_[k].embedding_dim;
  }
  if (cache != nullptr) {
    cache->acts.clear();
    cache->acts.push_back(x);
  }
  for (const auto& layer : layers_) {
    x = layer.forward(x);
    if (cache != nullptr) cache->acts.push_back(x);
  }
  return x;
}

template <typename Scalar>
Vector<Scalar> AuxModel<Scalar>::predictive_factors(const Query& q, ForwardCache<Scalar>* cache) const {
  return factors_from_rows(rows_for(q), cache);
}

template <typename Scalar>
Scalar AuxModel<Scalar>::logit_from_rows(const std::vector<const FeatureRow*>& rows) const {
  const Vector<Scalar> f = factors_from_rows(rows, nullptr);
  double acc = static_cast<double>(this->out_bias_.value(0, 0));
  for (Eigen::Index k = 0; k < f.size(); ++k)
    acc += static_cast<double>(this->out_weight_.value(0, k)) * static_cast<double>(f[k]);
  return static_cast<Scalar>(acc);
}

template <typename Scalar>
void AuxModel<Scalar>::backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) {
  if (cache.acts.size() != layers_.size() + 1) throw StateError("aux: cache does not hold a forward pass");
  Vector<Scalar> d = dfactors;
  for (std::size_t l = layers_.size(); l-- > 0;) d = layers_[l].backward(cache.acts[l], cache.acts[l + 1], d);
  const auto rows = rows_for(cache.query);
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    const auto dim = specs_[k].embedding_dim;
    embedding_lookup_avg_backward<Scalar>(embeddings_[k].grad, rows[k]->indices, rows[k]->mask,
                                          d.segment(offset, dim));
    offset += dim;
  }
}

// ---- Fused ---------------------------------------------------------------

template <typename Scalar>
FusedModel<Scalar>::FusedModel(const FusedModel& other)
    : Scorer<Scalar>(other), weights_(other.weights_), freeze_bodies_(other.freeze_bodies_) {
  for (const auto& c : other.components_) components_.push_back(c->clone());
}

template <typename Scalar>
bool FusedModel<Scalar>::uses_text() const {
  return std::any_of(components_.begin(), components_.end(), [](const auto& c) { return c->uses_text(); });
}

template <typename Scalar>
std::vector<FeatureSpec> FusedModel<Scalar>::feature_specs() const {
  std::vector<FeatureSpec> out;
  for (const auto& c : components_)
    for (const auto& spec : c->feature_specs())
      if (std::none_of(out.begin(), out.end(), [&](const auto& s) { return s.name == spec.name; }))
        out.push_back(spec);
  return out;
}

template <typename Scalar>
Index FusedModel<Scalar>::num_users() const {
  Index n = 0;
  for (const auto& c : components_) n = std::max(n, c->num_users());
  return n;
}

template <typename Scalar>
Index FusedModel<Scalar>::num_items() const {
  Index n = 0;
  for (const auto& c : components_) n = std::max(n, c->num_items());
  return n;
}

template <typename Scalar>
ParameterList<Scalar> FusedModel<Scalar>::body_parameters() {
  ParameterList<Scalar> out;
  for (auto& c : components_)
    for (auto* p : c->parameters()) out.push_back(p);
  return out;
}

template <typename Scalar>
void FusedModel<Scalar>::set_freeze_bodies(bool freeze) {
  freeze_bodies_ = freeze;
  for (auto* p : body_parameters()) p->trainable = !freeze;
}

template <typename Scalar>
Vector<Scalar> FusedModel<Scalar>::predictive_factors(const Query& q, ForwardCache<Scalar>* cache) const {
  std::vector<Vector<Scalar>> parts;
  parts.reserve(components_.size());
  Eigen::Index width = 0;
  if (cache != nullptr) cache->children.assign(components_.size(), {});
  for (std::size_t k = 0; k < components_.size(); ++k) {
    ForwardCache<Scalar>* child = cache != nullptr ? &cache->children[k] : nullptr;
    parts.push_back(components_[k]->predictive_factors(q, child));
    if (child != nullptr) {
      child->query = q;
      child->factors = parts.back();
      child->ready = true;
    }
    width += parts.back().size();
  }
  Vector<Scalar> out(width);
  Eigen::Index offset = 0;
  for (const auto& part : parts) {
    out.segment(offset, part.size()) = part;
    offset += part.size();
  }
  return out;
}

template <typename Scalar>
void FusedModel<Scalar>::backward_factors(const ForwardCache<Scalar>& cache, VectorRef<Scalar> dfactors) {
  if (freeze_bodies_) return;
  if (cache.children.size() != components_.size()) throw StateError("fused: cache does not hold a forward pass");
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto dim = components_[k]->factor_dim();
    components_[k]->backward_factors(cache.children[k], dfactors.segment(offset, dim));
    offset += dim;
  }
}

template <typename Scalar>
FusedModel<Scalar> FusedModel<Scalar>::assemble(std::vector<std::unique_ptr<Scorer<Scalar>>> components,
                                                std::vector<double> weights) {
  FusedModel model;
  int width = 0;
  for (const auto& c : components) width += c->factor_dim();
  model.components_ = std::move(components);
  model.weights_ = std::move(weights);
  model.out_weight_ = Parameter<Scalar>("fused.out_weight", Matrix<Scalar>::Zero(1, width), 2);
  model.out_bias_ = zeros<Scalar>("fused.out_bias", 1);
  return model;
}

template <typename Scalar>
FusedModel<Scalar> fuse(const std::vector<const Scorer<Scalar>*>& components, const std::vector<double>& weights) {
  if (components.size() < 2) throw ConfigError("fuse: need at least two components");
  if (components.size() != weights.size()) throw ConfigError("fuse: one weight per component required");
  double sum = 0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("fuse: weights must be finite and non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance)
    throw ConfigError("fuse: weights sum to " + std::to_string(sum) + ", expected 1");
  std::set<const Scorer<Scalar>*> seen;
  for (const auto* c : components) {
    if (c == nullptr) throw ConfigError("fuse: null component");
    if (!seen.insert(c).second) throw ConfigError("fuse: the same component was passed twice");
  }

  std::vector<std::unique_ptr<Scorer<Scalar>>> copies;
  for (std::size_t k = 0; k < components.size(); ++k) {
    auto copy = components[k]->clone();
    copy->prefix_names("c" + std::to_string(k) + ".");
    for (auto* p : copy->parameters()) {
      p->reset_optimizer();
      p->zero_grad();
      p->trainable = true;
    }
    copies.push_back(std::move(copy));
  }
  auto model = FusedModel<Scalar>::assemble(std::move(copies), weights);
  Eigen::Index offset = 0;
  double bias = 0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& head = components[k]->out_weight().value;
    for (Eigen::Index j = 0; j < head.cols(); ++j)
      model.out_weight_.value(0, offset + j) = static_cast<Scalar>(weights[k] * static_cast<double>(head(0, j)));
    offset += head.cols();
    bias += weights[k] * static_cast<double>(components[k]->out_bias().value(0, 0));
  }
  model.out_bias_.value(0, 0) = static_cast<Scalar>(bias);
  return model;
}

template class Scorer<float>;
template class Scorer<double>;
template struct DenseLayer<float>;
template struct DenseLayer<double>;
template class GmfModel<float>;
template class GmfModel<double>;
template class MlpModel<float>;
template class MlpModel<double>;
template class AuxModel<float>;
template class AuxModel<double>;
template class FusedModel<float>;
template class FusedModel<double>;
template FusedModel<float> fuse(const std::vector<const Scorer<float>*>&, const std::vector<double>&);
template FusedModel<double> fuse(const std::vector<const Scorer<double>*>&, const std::vector<double>&);

}  // namespace nhr
