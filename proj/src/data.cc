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

#include "nhr/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nhr/errors.hpp"

namespace nhr {

namespace {

bool is_unsigned_integer(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::vector<std::string> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <typename Int>
bool parse_int(const std::string& s, Int& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line_no, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

Index IdMap::intern(const std::string& raw) {
  auto [it, inserted] = dense_.try_emplace(raw, static_cast<Index>(raw_.size()));
  if (inserted) raw_.push_back(raw);
  return it->second;
}

std::optional<Index> IdMap::find(const std::string& raw) const {
  auto it = dense_.find(raw);
  if (it == dense_.end()) return std::nullopt;
  return it->second;
}

bool raw_id_less(const std::string& a, const std::string& b) {
  if (is_unsigned_integer(a) && is_unsigned_integer(b)) {
    auto strip = [](const std::string& s) {
      const auto nz = s.find_first_not_of('0');
      return nz == std::string::npos ? std::string_view("0") : std::string_view(s).substr(nz);
    };
    const auto sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    return sa < sb;
  }
  return a < b;
}

InteractionLog parse_interactions(std::istream& in, InteractionFormat format, const std::string& source) {
  InteractionLog log;
  // (user, item) -> record slot, for duplicate collapsing.
  std::unordered_map<std::uint64_t, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (view.empty()) continue;
    std::vector<std::string> fields;
    if (format == InteractionFormat::kMovieLensDat) {
      fields = split_on(view, "::");
      if (fields.size() != 4) parse_fail(source, line_no, "expected UserID::MovieID::Rating::Timestamp");
    } else {
      fields = split_on(view, "\t");
      if (fields.size() != 3) parse_fail(source, line_no, "expected user<TAB>item<TAB>timestamp");
    }
    const std::string& raw_ts = format == InteractionFormat::kMovieLensDat ? fields[3] : fields[2];
    std::int64_t ts = 0;
    if (fields[0].empty() || fields[1].empty()) parse_fail(source, line_no, "empty id");
    if (!parse_int(raw_ts, ts)) parse_fail(source, line_no, "bad timestamp '" + raw_ts + "'");
    if (format == InteractionFormat::kMovieLensDat) {
      double rating = 0;
      std::istringstream rs(fields[2]);
      if (!(rs >> rating)) parse_fail(source, line_no, "bad rating '" + fields[2] + "'");
    }
    const Index u = log.users.intern(fields[0]);
    const Index i = log.items.intern(fields[1]);
    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(i);
    auto [it, inserted] = seen.try_emplace(key, log.records.size());
    if (inserted) {
      log.records.push_back({u, i, ts});
    } else {
      auto& rec = log.records[it->second];
      rec.timestamp = std::max(rec.timestamp, ts);
    }
  }
  if (log.records.empty()) throw DataError(source + ": no interactions");
  log.num_users = log.users.size();
  log.num_items = log.items.size();
  return log;
}

InteractionLog load_interactions(const std::string& path, InteractionFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_interactions(in, format, path);
}

void write_remap(std::ostream& out, const IdMap& ids) {
  for (Index d = 0; d < ids.size(); ++d) out << ids.raw(d) << '\t' << d << '\n';
}

bool SplitDataset::is_positive(Index user, Index item) const {
  const auto& pos = positives_by_user.at(static_cast<std::size_t>(user));
  return std::binary_search(pos.begin(), pos.end(), item);
}

std::vector<Index> SplitDataset::eval_users() const {
  std::vector<Index> users;
  for (Index u = 0; u < num_users(); ++u)
    if (test_item[static_cast<std::size_t>(u)] != kNoItem) users.push_back(u);
  return users;
}

SplitDataset leave_one_out_split(const InteractionLog& log) {
  SplitDataset split;
  split.train.num_users = log.num_users;
  split.train.num_items = log.num_items;
  split.train.users = log.users;
  split.train.items = log.items;
  split.val_item.assign(static_cast<std::size_t>(log.num_users), kNoItem);
  split.test_item.assign(static_cast<std::size_t>(log.num_users), kNoItem);
  split.positives_by_user.assign(static_cast<std::size_t>(log.num_users), {});

  std::vector<std::vector<std::size_t>> by_user(static_cast<std::size_t>(log.num_users));
  for (std::size_t r = 0; r < log.records.size(); ++r)
    by_user[static_cast<std::size_t>(log.records[r].user)].push_back(r);

  auto later = [&](std::size_t a, std::size_t b) {
    const auto& ra = log.records[a];
    const auto& rb = log.records[b];
    if (ra.timestamp != rb.timestamp) return ra.timestamp < rb.timestamp;
    return raw_id_less(log.items.raw(ra.item), log.items.raw(rb.item));
  };

  std::vector<char> keep_record(log.records.size(), 0);
  for (Index u = 0; u < log.num_users; ++u) {
    auto& recs = by_user[static_cast<std::size_t>(u)];
    if (recs.size() < 3) {
      ++split.filtered_users;
      continue;
    }
    std::vector<std::size_t> ordered = recs;
    std::stable_sort(ordered.begin(), ordered.end(), later);
    split.test_item[static_cast<std::size_t>(u)] = log.records[ordered.back()].item;
    split.val_item[static_cast<std::size_t>(u)] = log.records[ordered[ordered.size() - 2]].item;
    for (std::size_t k = 0; k + 2 < ordered.size(); ++k) keep_record[ordered[k]] = 1;
    auto& pos = split.positives_by_user[static_cast<std::size_t>(u)];
    for (auto r : recs) pos.push_back(log.records[r].item);
    std::sort(pos.begin(), pos.end());
  }
  // Training records keep the input file order.
  for (std::size_t r = 0; r < log.records.size(); ++r)
    if (keep_record[r]) split.train.records.push_back(log.records[r]);
  if (split.filtered_users > 0)
    std::cerr << "warning: " << split.filtered_users << " users with fewer than 3 interactions dropped\n";
  return split;
}

// ---- features ------------------------------------------------------------

void FeatureSpec::validate() const {
  if (name.empty()) throw ConfigError("feature spec without a name");
  if (vocab_size < 2) throw ConfigError("feature " + name + ": vocab_size must be >= 2");
  if (input_length < 1) throw ConfigError("feature " + name + ": input_length must be >= 1");
  if (embedding_dim < 1) throw ConfigError("feature " + name + ": embedding_dim must be >= 1");
}

const FeatureRow& FeatureTable::row(Index entity) const {
  if (entity < 0 || static_cast<std::size_t>(entity) >= rows.size())
    throw LookupError("feature " + spec.name + ": entity " + std::to_string(entity) + " out of range");
  return rows[static_cast<std::size_t>(entity)];
}

const FeatureTable* FeatureSet::find(std::string_view name) const {
  for (const auto& t : tables)
    if (t.spec.name == name) return &t;
  return nullptr;
}

const FeatureTable& FeatureSet::at(std::string_view name) const {
  const auto* t = find(name);
  if (t == nullptr) throw ConfigError("missing feature table '" + std::string(name) + "'");
  return *t;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::int32_t> hash_text(std::string_view text, std::int32_t hash_space) {
  if (hash_space < 2) throw ConfigError("hash space must be >= 2");
  std::vector<std::int32_t> out;
  for (const auto& token : tokenize(text))
    out.push_back(1 + static_cast<std::int32_t>(fnv1a64(token) % static_cast<std::uint64_t>(hash_space - 1)));
  return out;
}

std::int32_t compute_input_length(std::span<const std::int64_t> lengths) {
  if (lengths.empty()) throw ConfigError("compute_input_length: no sequences");
  double mean = 0;
  for (auto l : lengths) mean += static_cast<double>(l);
  mean /= static_cast<double>(lengths.size());
  double var = 0;
  for (auto l : lengths) var += (static_cast<double>(l) - mean) * (static_cast<double>(l) - mean);
  var /= static_cast<double>(lengths.size());
  const double len = std::ceil(mean + std::sqrt(var));
  return std::max<std::int32_t>(1, static_cast<std::int32_t>(len));
}

FeatureRow pad_or_truncate(std::span<const std::int32_t> seq, std::int32_t length) {
  if (length < 1) throw ConfigError("pad_or_truncate: length must be positive");
  FeatureRow row;
  row.indices.assign(static_cast<std::size_t>(length), 0);
  row.mask.assign(static_cast<std::size_t>(length), 0);
  const std::size_t keep = std::min(seq.size(), static_cast<std::size_t>(length));
  for (std::size_t t = 0; t < keep; ++t) {
    row.indices[t] = seq[t];
    row.mask[t] = 1;
  }
  return row;
}

CategoricalVocab CategoricalVocab::build(const std::map<Index, std::vector<std::string>>& values) {
  CategoricalVocab vocab;
  for (const auto& [entity, labels] : values) {
    for (const auto& label : labels) {
      auto [it, inserted] = vocab.index_.try_emplace(label, static_cast<std::int32_t>(vocab.labels_.size()) + 1);
      if (inserted) vocab.labels_.push_back(label);
    }
  }
  return vocab;
}

std::int32_t CategoricalVocab::lookup(const std::string& label) const {
  auto it = index_.find(label);
  return it == index_.end() ? oov_index() : it->second;
}

namespace {

void check_entities(const auto& values, Index num_entities, const std::string& feature) {
  for (const auto& [entity, _] : values)
    if (entity < 0 || entity >= num_entities)
      throw LookupError("feature " + feature + ": entity " + std::to_string(entity) + " out of range [0, " +
                        std::to_string(num_entities) + ")");
}

}  // namespace

FeatureTable build_categorical_table(const std::map<Index, std::vector<std::string>>& values, Index num_entities,
                                     FeatureSpec spec, const CategoricalVocab& vocab) {
  check_entities(values, num_entities, spec.name);
  spec.kind = FeatureKind::kCategorical;
  if (spec.vocab_size == 0) spec.vocab_size = vocab.size();
  if (spec.vocab_size != vocab.size())
    throw ConfigError("feature " + spec.name + ": vocab_size disagrees with the vocabulary");
  if (spec.input_length == 0) {
    std::size_t longest = 1;
    for (const auto& [_, labels] : values) longest = std::max(longest, labels.size());
    spec.input_length = static_cast<std::int32_t>(longest);
  }
  spec.validate();
  FeatureTable table;
  table.spec = spec;
  table.rows.assign(static_cast<std::size_t>(num_entities), pad_or_truncate({}, spec.input_length));
  for (const auto& [entity, labels] : values) {
    std::vector<std::int32_t> seq;
    for (const auto& label : labels) seq.push_back(vocab.lookup(label));
    table.rows[static_cast<std::size_t>(entity)] = pad_or_truncate(seq, spec.input_length);
  }
  return table;
}

FeatureTable build_text_table(const std::map<Index, std::string>& values, Index num_entities, FeatureSpec spec) {
  check_entities(values, num_entities, spec.name);
  spec.kind = FeatureKind::kText;
  if (spec.vocab_size == 0) spec.vocab_size = kDefaultHashSpace;
  std::map<Index, std::vector<std::int32_t>> hashed;
  std::vector<std::int64_t> lengths;
  for (const auto& [entity, text] : values) {
    auto seq = hash_text(text, spec.vocab_size);
    lengths.push_back(static_cast<std::int64_t>(seq.size()));
    hashed.emplace(entity, std::move(seq));
  }
  if (spec.input_length == 0) spec.input_length = lengths.empty() ? 1 : compute_input_length(lengths);
  spec.validate();
  FeatureTable table;
  table.spec = spec;
  table.rows.assign(static_cast<std::size_t>(num_entities), pad_or_truncate({}, spec.input_length));
  for (const auto& [entity, seq] : hashed)
    table.rows[static_cast<std::size_t>(entity)] = pad_or_truncate(seq, spec.input_length);
  return table;
}

std::map<std::string, std::map<Index, std::vector<std::string>>> load_categorical_features(const std::string& path,
                                                                                          const IdMap& ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::map<std::string, std::map<Index, std::vector<std::string>>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = strip_cr(line);
    if (view.empty()) continue;
    auto fields = split_on(view, "\t");
    if (fields.size() != 3) parse_fail(path, line_no, "expected entity<TAB>feature<TAB>value");
    const auto dense = ids.find(fields[0]);
    if (!dense) continue;
    out[fields[1]][*dense].push_back(fields[2]);
  }
  return out;
}

std::map<Index, std::string> load_text_directory(const std::string& dir, const IdMap& ids) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("text feature directory not found: " + dir);
  std::map<Index, std::string> out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto dense = ids.find(file.stem().string());
    if (!dense) continue;
    std::ifstream in(file, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    out.emplace(*dense, text.str());
  }
  return out;
}

// ---- artifacts -----------------------------------------------------------

void write_split(std::ostream& train_out, std::ostream& heldout_out, const SplitDataset& split) {
  for (const auto& r : split.train.records) train_out << r.user << '\t' << r.item << '\t' << r.timestamp << '\n';
  heldout_out << "# filtered\t" << split.filtered_users << '\n';
  for (Index u = 0; u < split.num_users(); ++u) {
    const auto val = split.val_item[static_cast<std::size_t>(u)];
    if (val == kNoItem) continue;
    heldout_out << u << '\t' << val << '\t' << split.test_item[static_cast<std::size_t>(u)] << '\n';
  }
}

SplitDataset read_split(std::istream& train_in, std::istream& heldout_in, Index num_users, Index num_items) {
  SplitDataset split;
  split.train.num_users = num_users;
  split.train.num_items = num_items;
  split.val_item.assign(static_cast<std::size_t>(num_users), kNoItem);
  split.test_item.assign(static_cast<std::size_t>(num_users), kNoItem);
  split.positives_by_user.assign(static_cast<std::size_t>(num_users), {});
  auto check = [&](std::int64_t u, std::int64_t i, std::size_t line_no) {
    if (u < 0 || u >= num_users || i < 0 || i >= num_items)
      parse_fail("split artifact", line_no, "id out of range");
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(train_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_on(line, "\t");
    Interaction rec;
    if (f.size() != 3 || !parse_int(f[0], rec.user) || !parse_int(f[1], rec.item) || !parse_int(f[2], rec.timestamp))
      parse_fail("train split", line_no, "malformed record");
    check(rec.user, rec.item, line_no);
    split.train.records.push_back(rec);
    split.positives_by_user[static_cast<std::size_t>(rec.user)].push_back(rec.item);
  }
  line_no = 0;
  while (std::getline(heldout_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_on(line, "\t");
    if (f.size() == 2 && f[0] == "# filtered") {
      if (!parse_int(f[1], split.filtered_users)) parse_fail("heldout split", line_no, "bad filtered count");
      continue;
    }
    Index u = 0, val = 0, test = 0;
    if (f.size() != 3 || !parse_int(f[0], u) || !parse_int(f[1], val) || !parse_int(f[2], test))
      parse_fail("heldout split", line_no, "malformed record");
    check(u, val, line_no);
    check(u, test, line_no);
    split.val_item[static_cast<std::size_t>(u)] = val;
    split.test_item[static_cast<std::size_t>(u)] = test;
    auto& pos = split.positives_by_user[static_cast<std::size_t>(u)];
    pos.push_back(val);
    pos.push_back(test);
  }
  for (auto& pos : split.positives_by_user) {
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  }
  return split;
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
  const auto& s = table.spec;
  out << "# " << s.name << '\t' << (s.entity == Entity::kUser ? "user" : "item") << '\t'
      << (s.kind == FeatureKind::kText ? "text" : "categorical") << '\t' << s.vocab_size << '\t' << s.input_length
      << '\t' << s.embedding_dim << '\n';
  for (std::size_t e = 0; e < table.rows.size(); ++e) {
    out << e << '\t';
    const auto& row = table.rows[e];
    for (std::size_t t = 0; t < row.indices.size(); ++t) out << (t ? "," : "") << (row.mask[t] ? row.indices[t] : 0);
    out << '\n';
  }
}

FeatureTable read_feature_table(std::istream& in) {
  FeatureTable table;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw DataError("feature table: missing header");
  auto h = split_on(std::string_view(line).substr(2), "\t");
  if (h.size() != 6) throw DataError("feature table: malformed header");
  auto& s = table.spec;
  s.name = h[0];
  s.entity = h[1] == "user" ? Entity::kUser : Entity::kItem;
  s.kind = h[2] == "text" ? FeatureKind::kText : FeatureKind::kCategorical;
  if (!parse_int(h[3], s.vocab_size) || !parse_int(h[4], s.input_length) || !parse_int(h[5], s.embedding_dim))
    throw DataError("feature table: malformed header");
  s.validate();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_on(line, "\t");
    std::size_t entity = 0;
    if (f.size() != 2 || !parse_int(f[0], entity) || entity != table.rows.size())
      parse_fail("feature table " + s.name, line_no, "malformed row");
    FeatureRow row;
    for (const auto& tok : split_on(f[1], ",")) {
      std::int32_t idx = 0;
      if (!parse_int(tok, idx) || idx < 0 || idx >= s.vocab_size)
        parse_fail("feature table " + s.name, line_no, "bad index");
      row.indices.push_back(idx);
      row.mask.push_back(idx != 0 ? 1 : 0);
    }
    if (static_cast<std::int32_t>(row.indices.size()) != s.input_length)
      parse_fail("feature table " + s.name, line_no, "row length differs from input_length");
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace nhr
