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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nhr {

using Index = std::int32_t;
inline constexpr Index kNoItem = -1;

// 64-bit FNV-1a. Used for text hashing and for artifact fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

// Raw identifier <-> dense 0-based id, dense ids assigned in first-seen order.
class IdMap {
 public:
  Index intern(const std::string& raw);
  std::optional<Index> find(const std::string& raw) const;
  const std::string& raw(Index dense) const { return raw_.at(static_cast<std::size_t>(dense)); }
  Index size() const { return static_cast<Index>(raw_.size()); }
  const std::vector<std::string>& raw_ids() const { return raw_; }

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, Index> dense_;
};

// Orders raw ids numerically when both are unsigned integers, otherwise
// lexicographically.
bool raw_id_less(const std::string& a, const std::string& b);

struct Interaction {
  Index user = 0;
  Index item = 0;
  std::int64_t timestamp = 0;
};

struct InteractionLog {
  std::vector<Interaction> records;
  Index num_users = 0;
  Index num_items = 0;
  IdMap users;
  IdMap items;
};

enum class InteractionFormat { kMovieLensDat, kTsv };

// Parses `UserID::MovieID::Rating::Timestamp` (rating discarded) or
// `user<TAB>item<TAB>timestamp`. A repeated (user, item) pair keeps one record
// with the latest timestamp.
InteractionLog parse_interactions(std::istream& in, InteractionFormat format, const std::string& source = "<stream>");
InteractionLog load_interactions(const std::string& path, InteractionFormat format);

// `raw_id<TAB>dense_id` lines in dense-id order.
void write_remap(std::ostream& out, const IdMap& ids);

struct SplitDataset {
  // Training records only; ids match the full log.
  InteractionLog train;
  // Per dense user id; kNoItem for users dropped by the split.
  std::vector<Index> val_item;
  std::vector<Index> test_item;
  // Per user, sorted train + val + test items.
  std::vector<std::vector<Index>> positives_by_user;
  Index filtered_users = 0;

  Index num_users() const { return train.num_users; }
  Index num_items() const { return train.num_items; }
  bool is_positive(Index user, Index item) const;
  // Users that own a val and test item, ascending.
  std::vector<Index> eval_users() const;
};

// Per user: latest record -> test, second latest -> val, the rest -> train.
// Timestamp ties are ordered by raw item id, so the larger raw id counts as
// later. Users with fewer than three records are dropped and counted.
SplitDataset leave_one_out_split(const InteractionLog& log);

// ---- side features -------------------------------------------------------

enum class Entity : std::uint8_t { kUser = 0, kItem = 1 };
enum class FeatureKind : std::uint8_t { kCategorical = 0, kText = 1 };

inline constexpr std::int32_t kDefaultHashSpace = 1000;

struct FeatureSpec {
  std::string name;
  Entity entity = Entity::kItem;
  FeatureKind kind = FeatureKind::kCategorical;
  // Embedding rows including padding index 0; the hash space for text.
  std::int32_t vocab_size = 0;
  std::int32_t input_length = 0;
  std::int32_t embedding_dim = 0;

  void validate() const;
  bool operator==(const FeatureSpec&) const = default;
};

struct FeatureRow {
  std::vector<std::int32_t> indices;
  std::vector<std::uint8_t> mask;
};

struct FeatureTable {
  FeatureSpec spec;
  std::vector<FeatureRow> rows;

  const FeatureRow& row(Index entity) const;
};

struct FeatureSet {
  std::vector<FeatureTable> tables;

  const FeatureTable* find(std::string_view name) const;
  const FeatureTable& at(std::string_view name) const;
};

// Lowercases ASCII and splits on runs of ASCII non-alphanumerics. Bytes >= 0x80
// stay inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// Token indices in [1, hash_space), via 1 + fnv1a64(token) mod (hash_space - 1).
std::vector<std::int32_t> hash_text(std::string_view text, std::int32_t hash_space = kDefaultHashSpace);

// ceil(mean + population stddev) of sequence lengths, at least 1.
std::int32_t compute_input_length(std::span<const std::int64_t> lengths);

// Keeps the head of long sequences; pads short ones with index 0 / mask 0.
FeatureRow pad_or_truncate(std::span<const std::int32_t> seq, std::int32_t length);

// Label vocabulary: 0 = padding, 1..n = labels in first-seen order,
// n + 1 = out-of-vocabulary.
class CategoricalVocab {
 public:
  static CategoricalVocab build(const std::map<Index, std::vector<std::string>>& values);

  std::int32_t size() const { return static_cast<std::int32_t>(labels_.size()) + 2; }
  std::int32_t oov_index() const { return size() - 1; }
  std::int32_t lookup(const std::string& label) const;
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Entities absent from `values` get all-padding rows. A zero vocab_size is
// filled from the vocabulary; a zero input_length from the longest label list.
FeatureTable build_categorical_table(const std::map<Index, std::vector<std::string>>& values, Index num_entities,
                                     FeatureSpec spec, const CategoricalVocab& vocab);

// A zero vocab_size becomes kDefaultHashSpace; a zero input_length is derived
// with compute_input_length over entities that have text.
FeatureTable build_text_table(const std::map<Index, std::string>& values, Index num_entities, FeatureSpec spec);

// `entity_raw_id<TAB>feature_name<TAB>value` lines, grouped by feature name.
// Raw ids unknown to `ids` are skipped.
std::map<std::string, std::map<Index, std::vector<std::string>>> load_categorical_features(const std::string& path,
                                                                                          const IdMap& ids);

// Reads `<raw_id>.txt` files from a directory.
std::map<Index, std::string> load_text_directory(const std::string& dir, const IdMap& ids);

// ---- artifact round-trips used by the CLI --------------------------------

void write_split(std::ostream& train_out, std::ostream& heldout_out, const SplitDataset& split);
SplitDataset read_split(std::istream& train_in, std::istream& heldout_in, Index num_users, Index num_items);

void write_feature_table(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_table(std::istream& in);

}  // namespace nhr
