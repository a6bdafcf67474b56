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

#include "nhr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nhr/errors.hpp"

namespace nhr {

namespace {

constexpr char kMagic[4] = {'N', 'H', 'R', '1'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * b);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic() {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, kMagic, 4) != 0) throw CheckpointError("checkpoint: bad magic");
    pos_ += 4;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct ParamRecord {
  std::string name;
  int rank;
  const Matrix<float>* value;
};

void write_header(ByteWriter& w, ModelKind kind) {
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kind));
}

ModelKind read_header(ByteReader& r) {
  r.expect_magic();
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto kind = r.u32();
  if (kind < 1 || kind > 6) throw CheckpointError("checkpoint: unknown model kind " + std::to_string(kind));
  return static_cast<ModelKind>(kind);
}

void write_specs(ByteWriter& w, const std::vector<FeatureSpec>& specs) {
  w.u32(static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    w.str(s.name);
    w.u8(static_cast<std::uint8_t>(s.entity));
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u32(static_cast<std::uint32_t>(s.vocab_size));
    w.u32(static_cast<std::uint32_t>(s.input_length));
    w.u32(static_cast<std::uint32_t>(s.embedding_dim));
  }
}

std::vector<FeatureSpec> read_specs(ByteReader& r) {
  std::vector<FeatureSpec> specs(r.u32());
  for (auto& s : specs) {
    s.name = r.str();
    const auto entity = r.u8();
    const auto kind = r.u8();
    if (entity > 1 || kind > 1) throw CheckpointError("checkpoint: bad feature spec");
    s.entity = static_cast<Entity>(entity);
    s.kind = static_cast<FeatureKind>(kind);
    s.vocab_size = static_cast<std::int32_t>(r.u32());
    s.input_length = static_cast<std::int32_t>(r.u32());
    s.embedding_dim = static_cast<std::int32_t>(r.u32());
  }
  return specs;
}

void write_params(ByteWriter& w, const std::vector<ParamRecord>& params) {
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.rank));
    w.u32(static_cast<std::uint32_t>(p.value->rows()));
    if (p.rank == 2) w.u32(static_cast<std::uint32_t>(p.value->cols()));
    for (Eigen::Index k = 0; k < p.value->size(); ++k) w.f32(p.value->data()[k]);
  }
}

// Reads parameters into pre-shaped targets, which must match name, rank, and
// dims in order.
void read_params(ByteReader& r, const std::vector<std::pair<std::string, Matrix<float>*>>& targets,
                 const std::vector<int>& ranks) {
  const auto count = r.u32();
  if (count != targets.size())
    throw CheckpointError("checkpoint: expected " + std::to_string(targets.size()) + " parameters, found " +
                          std::to_string(count));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& [name, target] = targets[k];
    const auto found = r.str();
    if (found != name) throw CheckpointError("checkpoint: expected parameter " + name + ", found " + found);
    const auto rank = r.u32();
    if (static_cast<int>(rank) != ranks[k]) throw CheckpointError("checkpoint: rank mismatch for " + name);
    const auto rows = r.u32();
    const auto cols = rank == 2 ? r.u32() : 1u;
    if (rows != target->rows() || cols != target->cols())
      throw CheckpointError("checkpoint: shape mismatch for " + name);
    for (Eigen::Index i = 0; i < target->size(); ++i) target->data()[i] = r.f32();
  }
}

void write_descriptor(ByteWriter& w, const Scorer<float>& model) {
  switch (model.kind()) {
    case ModelKind::kGmf:
    case ModelKind::kMlp:
      w.u32(static_cast<std::uint32_t>(model.num_users()));
      w.u32(static_cast<std::uint32_t>(model.num_items()));
      w.u32(static_cast<std::uint32_t>(model.factor_dim()));
      break;
    case ModelKind::kAux:
      w.u32(static_cast<std::uint32_t>(model.factor_dim()));
      write_specs(w, model.feature_specs());
      break;
    case ModelKind::kFused: {
      const auto& fused = dynamic_cast<const FusedModel<float>&>(model);
      w.u32(static_cast<std::uint32_t>(fused.num_components()));
      for (std::size_t k = 0; k < fused.num_components(); ++k) {
        w.u32(static_cast<std::uint32_t>(fused.component(k).kind()));
        write_descriptor(w, fused.component(k));
      }
      for (double weight : fused.weights()) w.f64(weight);
      w.u8(fused.freeze_bodies() ? 1 : 0);
      break;
    }
    default:
      throw CheckpointError("checkpoint: not a neural model kind");
  }
}

std::unique_ptr<Scorer<float>> read_descriptor(ByteReader& r, ModelKind kind) {
  Rng rng(0);
  switch (kind) {
    case ModelKind::kGmf:
    case ModelKind::kMlp: {
      const auto users = static_cast<Index>(r.u32());
      const auto items = static_cast<Index>(r.u32());
      const auto pf = static_cast<int>(r.u32());
      if (users < 1 || items < 1 || pf < 1) throw CheckpointError("checkpoint: bad model dimensions");
      if (kind == ModelKind::kGmf) return std::make_unique<GmfModel<float>>(users, items, pf, rng);
      return std::make_unique<MlpModel<float>>(users, items, pf, rng);
    }
    case ModelKind::kAux: {
      const auto pf = static_cast<int>(r.u32());
      auto specs = read_specs(r);
      try {
        return std::make_unique<AuxModel<float>>(std::move(specs), pf, rng);
      } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
      }
    }
    case ModelKind::kFused: {
      const auto n = r.u32();
      if (n < 2 || n > 1024) throw CheckpointError("checkpoint: bad component count");
      std::vector<std::unique_ptr<Scorer<float>>> components;
      for (std::uint32_t k = 0; k < n; ++k) {
        const auto child_kind = r.u32();
        if (child_kind < 1 || child_kind > 4) throw CheckpointError("checkpoint: bad component kind");
        auto child = read_descriptor(r, static_cast<ModelKind>(child_kind));
        child->prefix_names("c" + std::to_string(k) + ".");
        components.push_back(std::move(child));
      }
      std::vector<double> weights(n);
      for (auto& weight : weights) weight = r.f64();
      const bool freeze = r.u8() != 0;
      auto fused = std::make_unique<FusedModel<float>>(FusedModel<float>::assemble(std::move(components), weights));
      fused->set_freeze_bodies(freeze);
      return fused;
    }
    default:
      throw CheckpointError("checkpoint: not a neural model kind");
  }
}

std::string kind_mismatch(ModelKind found, ModelKind expected) {
  return "checkpoint: holds a " + std::string(kind_name(found)) + " model, expected " +
         std::string(kind_name(expected));
}

}  // namespace

std::string encode_checkpoint(const Scorer<float>& model) {
  ByteWriter w;
  write_header(w, model.kind());
  write_descriptor(w, model);
  write_specs(w, model.feature_specs());
  std::vector<ParamRecord> params;
  for (const auto* p : model.parameters()) params.push_back({p->name, p->rank, &p->value});
  write_params(w, params);
  return w.take();
}

std::string encode_checkpoint(const PopRankModel& model) {
  ByteWriter w;
  write_header(w, ModelKind::kPopRank);
  w.u32(static_cast<std::uint32_t>(model.counts.size()));
  write_specs(w, {});
  Matrix<float> counts(static_cast<Eigen::Index>(model.counts.size()), 1);
  for (std::size_t i = 0; i < model.counts.size(); ++i)
    counts(static_cast<Eigen::Index>(i), 0) = static_cast<float>(model.counts[i]);
  write_params(w, {{"poprank.counts", 1, &counts}});
  return w.take();
}

std::string encode_checkpoint(const BprModel& model) {
  ByteWriter w;
  write_header(w, ModelKind::kBpr);
  w.u32(static_cast<std::uint32_t>(model.user_factors.rows()));
  w.u32(static_cast<std::uint32_t>(model.item_factors.rows()));
  w.u32(static_cast<std::uint32_t>(model.user_factors.cols()));
  write_specs(w, {});
  Matrix<float> bias = model.item_bias;
  write_params(w, {{"bpr.user_factors", 2, &model.user_factors},
                   {"bpr.item_factors", 2, &model.item_factors},
                   {"bpr.item_bias", 1, &bias}});
  return w.take();
}

ModelKind peek_kind(const std::string& bytes) {
  ByteReader r(bytes);
  return read_header(r);
}

std::unique_ptr<Scorer<float>> decode_model(const std::string& bytes, std::optional<ModelKind> expected) {
  ByteReader r(bytes);
  const auto kind = read_header(r);
  if (expected && kind != *expected) throw CheckpointError(kind_mismatch(kind, *expected));
  auto model = read_descriptor(r, kind);
  const auto specs = read_specs(r);
  const auto declared = model->feature_specs();
  if (specs.size() != declared.size()) throw CheckpointError("checkpoint: feature spec block disagrees with model");
  for (std::size_t k = 0; k < specs.size(); ++k)
    if (!same_layout(specs[k], declared[k])) throw CheckpointError("checkpoint: feature spec block disagrees with model");
  std::vector<std::pair<std::string, Matrix<float>*>> targets;
  std::vector<int> ranks;
  for (auto* p : model->parameters()) {
    targets.emplace_back(p->name, &p->value);
    ranks.push_back(p->rank);
  }
  read_params(r, targets, ranks);
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes");
  return model;
}

PopRankModel decode_poprank(const std::string& bytes) {
  ByteReader r(bytes);
  const auto kind = read_header(r);
  if (kind != ModelKind::kPopRank) throw CheckpointError(kind_mismatch(kind, ModelKind::kPopRank));
  const auto items = r.u32();
  if (!read_specs(r).empty()) throw CheckpointError("checkpoint: poprank carries no features");
  Matrix<float> counts(items, 1);
  read_params(r, {{"poprank.counts", &counts}}, {1});
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes");
  PopRankModel model;
  model.counts.resize(items);
  for (std::uint32_t i = 0; i < items; ++i) model.counts[i] = static_cast<std::int64_t>(counts(i, 0));
  return model;
}

BprModel decode_bpr(const std::string& bytes) {
  ByteReader r(bytes);
  const auto kind = read_header(r);
  if (kind != ModelKind::kBpr) throw CheckpointError(kind_mismatch(kind, ModelKind::kBpr));
  const auto users = r.u32();
  const auto items = r.u32();
  const auto dim = r.u32();
  if (!read_specs(r).empty()) throw CheckpointError("checkpoint: bpr carries no features");
  BprModel model;
  model.user_factors.resize(users, dim);
  model.item_factors.resize(items, dim);
  Matrix<float> bias(items, 1);
  read_params(r, {{"bpr.user_factors", &model.user_factors}, {"bpr.item_factors", &model.item_factors},
                  {"bpr.item_bias", &bias}},
              {2, 2, 1});
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes");
  model.item_bias = flat(bias);
  return model;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path);
}

}  // namespace

void save_checkpoint(const Scorer<float>& model, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(model));
}
void save_checkpoint(const PopRankModel& model, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(model));
}
void save_checkpoint(const BprModel& model, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

std::unique_ptr<Scorer<float>> load_checkpoint(const std::string& path, std::optional<ModelKind> expected) {
  return decode_model(read_file_bytes(path), expected);
}

}  // namespace nhr
