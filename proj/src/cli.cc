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

#include "nhr/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nhr/checkpoint.hpp"
#include "nhr/errors.hpp"
#include "nhr/evaluation.hpp"
#include "nhr/sampling.hpp"

namespace nhr {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitConfig;
  if (dynamic_cast<const ProtocolError*>(&e) != nullptr) return kExitProtocol;
  if (dynamic_cast<const DataError*>(&e) != nullptr || dynamic_cast<const CheckpointError*>(&e) != nullptr ||
      dynamic_cast<const LookupError*>(&e) != nullptr || dynamic_cast<const NumericError*>(&e) != nullptr)
    return kExitData;
  return kExitOther;
}

// ---- configuration -------------------------------------------------------

namespace {

// RNG streams derived from the experiment seed. pretrain_all uses 2k and
// 2k + 1 for model k.
constexpr std::uint64_t kStreamValCandidates = 1'000'001;
constexpr std::uint64_t kStreamTestCandidates = 1'000'002;
constexpr std::uint64_t kStreamBpr = 1'000'003;
constexpr std::uint64_t kStreamFusion = 2'000'000;

ModelKind kind_from_string(const std::string& s) {
  if (s == "gmf") return ModelKind::kGmf;
  if (s == "mlp") return ModelKind::kMlp;
  if (s == "aux") return ModelKind::kAux;
  throw ConfigError("unknown model type '" + s + "' (expected gmf, mlp or aux)");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void ExperimentConfig::validate(bool check_inputs) const {
  train.validate();
  bpr.validate();
  if (eval_negatives < 1) throw ConfigError("eval.negatives must be >= 1");
  if (finetune_epochs < 0) throw ConfigError("training.finetune_epochs must be >= 0");
  std::set<std::string> names;
  for (const auto& f : features) {
    if (!names.insert(f.name).second) throw ConfigError("duplicate feature name '" + f.name + "'");
    if (f.embedding_dim < 1) throw ConfigError("feature " + f.name + ": embedding_dim must be positive");
    if (f.kind == FeatureKind::kText && f.hash_space < 2)
      throw ConfigError("feature " + f.name + ": hash_space must be >= 2");
    if (f.input_length < 0) throw ConfigError("feature " + f.name + ": input_length must be >= 0");
  }
  std::set<std::string> models;
  for (const auto& m : this->models) {
    if (!models.insert(m.name).second) throw ConfigError("duplicate model name '" + m.name + "'");
    for (const auto& f : m.features)
      if (!names.count(f)) throw ConfigError("model " + m.name + ": unknown feature '" + f + "'");
    if (m.kind == ModelKind::kAux && features.empty())
      throw ConfigError("model " + m.name + ": aux models need declared features");
  }
  for (const auto& f : fusions) {
    if (models.count(f.name)) throw ConfigError("fusion name '" + f.name + "' clashes with a model");
    if (f.components.size() < 2) throw ConfigError("fusion " + f.name + ": needs at least two components");
    for (const auto& c : f.components)
      if (!models.count(c)) throw ConfigError("fusion " + f.name + ": unknown component '" + c + "'");
  }
  if (check_inputs) {
    if (!fs::is_regular_file(interactions))
      throw ConfigError("interactions file not found: " + interactions.string());
    for (const auto& f : features) {
      if (f.kind == FeatureKind::kText && !fs::is_directory(f.source))
        throw ConfigError("feature " + f.name + ": text directory not found: " + f.source.string());
      if (f.kind == FeatureKind::kCategorical && !fs::is_regular_file(f.source))
        throw ConfigError("feature " + f.name + ": file not found: " + f.source.string());
    }
  }
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  try {
    const auto& ds = j.at("dataset");
    cfg.dataset_json = ds.dump();
    cfg.interactions = resolve(base_dir, ds.at("interactions").get<std::string>());
    const auto format = ds.value("format", std::string("movielens"));
    if (format == "movielens")
      cfg.format = InteractionFormat::kMovieLensDat;
    else if (format == "tsv")
      cfg.format = InteractionFormat::kTsv;
    else
      throw ConfigError("dataset.format must be movielens or tsv");

    for (const auto& f : ds.value("features", json::array())) {
      FeatureDecl d;
      d.name = f.at("name").get<std::string>();
      const auto entity = f.at("entity").get<std::string>();
      if (entity != "user" && entity != "item") throw ConfigError("feature " + d.name + ": entity must be user or item");
      d.entity = entity == "user" ? Entity::kUser : Entity::kItem;
      const auto kind = f.at("kind").get<std::string>();
      if (kind == "text") {
        d.kind = FeatureKind::kText;
        d.source = resolve(base_dir, f.at("dir").get<std::string>());
      } else if (kind == "categorical") {
        d.kind = FeatureKind::kCategorical;
        d.source = resolve(base_dir, f.at("path").get<std::string>());
      } else {
        throw ConfigError("feature " + d.name + ": kind must be text or categorical");
      }
      d.embedding_dim = f.value("embedding_dim", d.embedding_dim);
      d.hash_space = f.value("hash_space", d.hash_space);
      d.input_length = f.value("input_length", d.input_length);
      cfg.features.push_back(std::move(d));
    }

    cfg.train.pf = j.value("pf", cfg.train.pf);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("output")) cfg.output = resolve(base_dir, j.at("output").get<std::string>());

    for (const auto& m : j.value("models", json::array({"gmf", "mlp"}))) {
      ModelDecl d;
      if (m.is_string()) {
        d.name = m.get<std::string>();
        d.kind = kind_from_string(d.name);
      } else {
        d.name = m.at("name").get<std::string>();
        d.kind = kind_from_string(m.value("type", d.name));
        d.features = m.value("features", std::vector<std::string>{});
      }
      cfg.models.push_back(std::move(d));
    }
    for (const auto& f : j.value("fusion", json::array())) {
      FusionDecl d;
      d.name = f.at("name").get<std::string>();
      d.components = f.at("components").get<std::vector<std::string>>();
      d.weights = f.value("weights", std::vector<double>{});
      cfg.fusions.push_back(std::move(d));
    }

    const auto t = j.value("training", json::object());
    auto& tc = cfg.train;
    tc.adam.lr = t.value("lr", tc.adam.lr);
    tc.adam.beta1 = t.value("beta1", tc.adam.beta1);
    tc.adam.beta2 = t.value("beta2", tc.adam.beta2);
    tc.adam.eps = t.value("eps", tc.adam.eps);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.text_batch_size = t.value("text_batch_size", tc.text_batch_size);
    tc.negative_ratio = t.value("negative_ratio", tc.negative_ratio);
    tc.max_epochs = t.value("max_epochs", tc.max_epochs);
    tc.patience = t.value("patience", tc.patience);
    tc.freeze_bodies = t.value("freeze_bodies", tc.freeze_bodies);
    cfg.finetune_epochs = t.value("finetune_epochs", tc.max_epochs);
    cfg.grid_step = t.value("grid_step", cfg.grid_step);

    const auto e = j.value("eval", json::object());
    cfg.eval_negatives = e.value("negatives", cfg.eval_negatives);
    tc.eval_k = e.value("k", tc.eval_k);

    const auto b = j.value("baselines", json::object()).value("bpr", json::object());
    cfg.run_bpr = b.value("enabled", true);
    cfg.bpr.dim = b.value("dim", tc.pf);
    cfg.bpr.lr = b.value("lr", cfg.bpr.lr);
    cfg.bpr.reg = b.value("reg", cfg.bpr.reg);
    cfg.bpr.epochs = b.value("epochs", cfg.bpr.epochs);
    cfg.bpr.triples_per_record = b.value("triples_per_record", cfg.bpr.triples_per_record);
    cfg.bpr.init_scale = b.value("init_scale", cfg.bpr.init_scale);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---- artifacts -----------------------------------------------------------

namespace {

struct Layout {
  fs::path root;

  fs::path data() const { return root / "data"; }
  fs::path manifest() const { return data() / "manifest.json"; }
  fs::path features() const { return data() / "features"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path reports() const { return root / "reports"; }
  fs::path logs() const { return root / "logs"; }
  fs::path eval() const { return root / "eval"; }
  fs::path checkpoint(const std::string& name) const { return checkpoints() / (name + ".ckpt"); }
  fs::path checkpoint_meta(const std::string& name) const { return checkpoints() / (name + ".meta.json"); }
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProtocolError("missing artifact " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string file_digest(const fs::path& path) { return hex64(fnv1a64(file_bytes(path))); }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

template <typename Fn>
void write_stream(const fs::path& path, Fn&& fn) {
  std::ostringstream out;
  fn(out);
  write_text(path, out.str());
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ProtocolError("missing artifact " + path.string() + " (run `nhr ingest` first)");
  return in;
}

// Everything later commands read from an ingest.
struct Ingested {
  json manifest;
  std::string manifest_digest;
  SplitDataset split;
  FeatureSet features;
  EvalCandidates val;
  EvalCandidates test;
};

// Rehashes every file listed in the manifest and checks that the manifest
// was produced from the same dataset section, seed and candidate count.
Ingested load_ingested(const Layout& layout, const ExperimentConfig& cfg) {
  if (!fs::exists(layout.manifest()))
    throw ProtocolError("no manifest at " + layout.manifest().string() + " (run `nhr ingest` first)");
  Ingested in;
  const auto manifest_text = file_bytes(layout.manifest());
  in.manifest_digest = hex64(fnv1a64(manifest_text));
  try {
    in.manifest = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw ProtocolError("stale artifact: unreadable manifest: " + std::string(e.what()));
  }
  const auto& m = in.manifest;
  for (const auto& [rel, digest] : m.at("files").items()) {
    const auto path = layout.data() / rel;
    if (!fs::exists(path)) throw ProtocolError("stale artifact: " + rel + " listed in manifest is missing");
    if (file_digest(path) != digest.get<std::string>())
      throw ProtocolError("stale artifact: " + rel + " changed since ingest (re-run `nhr ingest`)");
  }
  if (m.at("dataset").dump() != cfg.dataset_json)
    throw ProtocolError("stale artifact: dataset section of the config changed since ingest");
  if (m.at("seed").get<std::uint64_t>() != cfg.seed)
    throw ProtocolError("stale artifact: ingest used seed " + std::to_string(m.at("seed").get<std::uint64_t>()) +
                        ", this run uses " + std::to_string(cfg.seed));
  if (m.at("eval_negatives").get<int>() != cfg.eval_negatives)
    throw ProtocolError("stale artifact: eval.negatives changed since ingest");

  const auto users = m.at("users").get<Index>();
  const auto items = m.at("items").get<Index>();
  auto train_in = open_in(layout.data() / "train.tsv");
  auto heldout_in = open_in(layout.data() / "heldout.tsv");
  in.split = read_split(train_in, heldout_in, users, items);
  for (const auto& name : m.at("features").get<std::vector<std::string>>()) {
    auto fin = open_in(layout.features() / (name + ".tsv"));
    in.features.tables.push_back(read_feature_table(fin));
  }
  auto val_in = open_in(layout.data() / "val_candidates.tsv");
  in.val = read_candidates(val_in);
  auto test_in = open_in(layout.data() / "test_candidates.tsv");
  in.test = read_candidates(test_in);
  return in;
}

void write_checkpoint_meta(const Layout& layout, const std::string& name, ModelKind kind, const Ingested& in) {
  json meta = {{"kind", std::string(kind_name(kind))}, {"manifest", in.manifest_digest}};
  write_text(layout.checkpoint_meta(name), meta.dump(2) + "\n");
}

void check_checkpoint_meta(const Layout& layout, const std::string& name, const Ingested& in) {
  const auto path = layout.checkpoint_meta(name);
  if (!fs::exists(path)) throw ProtocolError("stale artifact: checkpoint " + name + " has no metadata");
  const auto meta = json::parse(file_bytes(path));
  if (meta.at("manifest").get<std::string>() != in.manifest_digest)
    throw ProtocolError("stale artifact: checkpoint " + name + " was trained on a different ingest");
}

std::unique_ptr<Scorer<float>> load_model(const Layout& layout, const std::string& name, const Ingested& in) {
  const auto path = layout.checkpoint(name);
  if (!fs::exists(path)) throw ProtocolError("checkpoint " + path.string() + " not found (run `nhr pretrain`)");
  check_checkpoint_meta(layout, name, in);
  return load_checkpoint(path.string());
}

void log(const std::string& msg) { std::cerr << "[nhr] " << msg << '\n'; }

// ---- commands ------------------------------------------------------------

void cmd_ingest(const ExperimentConfig& cfg, const Layout& layout) {
  cfg.validate(true);
  const auto log_data = load_interactions(cfg.interactions.string(), cfg.format);
  const auto split = leave_one_out_split(log_data);
  log("ingest: " + std::to_string(log_data.num_users) + " users, " + std::to_string(log_data.num_items) +
      " items, " + std::to_string(log_data.records.size()) + " interactions");

  FeatureSet features;
  for (const auto& f : cfg.features) {
    const auto& ids = f.entity == Entity::kUser ? log_data.users : log_data.items;
    const Index entities = f.entity == Entity::kUser ? log_data.num_users : log_data.num_items;
    FeatureSpec spec{f.name, f.entity, f.kind, 0, f.input_length, f.embedding_dim};
    if (f.kind == FeatureKind::kText) {
      spec.vocab_size = f.hash_space;
      features.tables.push_back(build_text_table(load_text_directory(f.source.string(), ids), entities, spec));
    } else {
      auto all = load_categorical_features(f.source.string(), ids);
      auto it = all.find(f.name);
      if (it == all.end()) throw ConfigError("feature " + f.name + ": no rows named '" + f.name + "' in " +
                                             f.source.string());
      const auto vocab = CategoricalVocab::build(it->second);
      features.tables.push_back(build_categorical_table(it->second, entities, spec, vocab));
    }
  }

  Rng val_rng(Rng::derive_seed(cfg.seed, kStreamValCandidates));
  Rng test_rng(Rng::derive_seed(cfg.seed, kStreamTestCandidates));
  const auto val = sample_eval_candidates(split, cfg.eval_negatives, val_rng, HeldOut::kValidation);
  const auto test = sample_eval_candidates(split, cfg.eval_negatives, test_rng, HeldOut::kTest);

  const auto dir = layout.data();
  fs::create_directories(layout.features());
  std::vector<std::string> files;
  write_stream(dir / "remap_users.tsv", [&](std::ostream& o) { write_remap(o, log_data.users); });
  write_stream(dir / "remap_items.tsv", [&](std::ostream& o) { write_remap(o, log_data.items); });
  {
    std::ostringstream train_out, heldout_out;
    write_split(train_out, heldout_out, split);
    write_text(dir / "train.tsv", train_out.str());
    write_text(dir / "heldout.tsv", heldout_out.str());
  }
  write_stream(dir / "val_candidates.tsv", [&](std::ostream& o) { write_candidates(o, val); });
  write_stream(dir / "test_candidates.tsv", [&](std::ostream& o) { write_candidates(o, test); });
  files = {"remap_users.tsv", "remap_items.tsv", "train.tsv", "heldout.tsv", "val_candidates.tsv",
           "test_candidates.tsv"};
  std::vector<std::string> feature_names;
  for (const auto& t : features.tables) {
    write_stream(layout.features() / (t.spec.name + ".tsv"), [&](std::ostream& o) { write_feature_table(o, t); });
    files.push_back("features/" + t.spec.name + ".tsv");
    feature_names.push_back(t.spec.name);
  }

  json manifest;
  manifest["format_version"] = 1;
  manifest["dataset"] = json::parse(cfg.dataset_json);
  manifest["seed"] = cfg.seed;
  manifest["eval_negatives"] = cfg.eval_negatives;
  manifest["users"] = log_data.num_users;
  manifest["items"] = log_data.num_items;
  manifest["interactions"] = log_data.records.size();
  manifest["train_records"] = split.train.records.size();
  manifest["filtered_users"] = split.filtered_users;
  manifest["eval_users"] = test.size();
  manifest["val_fingerprint"] = val.fingerprint();
  manifest["test_fingerprint"] = test.fingerprint();
  manifest["features"] = feature_names;
  json hashes = json::object();
  for (const auto& f : files) hashes[f] = file_digest(dir / f);
  manifest["files"] = hashes;
  write_text(layout.manifest(), manifest.dump(2) + "\n");
  std::cout << manifest.dump(2) << '\n';
}

void save_train_outputs(const Layout& layout, const std::string& name, const TrainReport& report) {
  write_stream(layout.reports() / (name + ".train.jsonl"), [&](std::ostream& o) { write_train_report(o, report); });
  write_stream(layout.logs() / (name + ".timing.log"), [&](std::ostream& o) { write_train_timing(o, report); });
}

void cmd_pretrain(const ExperimentConfig& cfg, const Layout& layout) {
  const auto in = load_ingested(layout, cfg);
  if (cfg.models.empty()) throw ConfigError("no models declared");
  fs::create_directories(layout.checkpoints());
  for (std::size_t k = 0; k < cfg.models.size(); ++k) log("pretrain: " + cfg.models[k].name);
  auto trained = pretrain_all(cfg.models, in.split, &in.features, &in.val, cfg.train);
  for (const auto& pm : trained) {
    save_checkpoint(*pm.model, layout.checkpoint(pm.name).string());
    write_checkpoint_meta(layout, pm.name, pm.model->kind(), in);
    save_train_outputs(layout, pm.name, pm.report);
    log("pretrain: " + pm.name + " best epoch " + std::to_string(pm.report.best_epoch) + ", val HR@" +
        std::to_string(cfg.train.eval_k) + " " + std::to_string(pm.report.best_val_hr));
  }
}

std::vector<double> parse_weights(const std::string& text) {
  std::vector<double> w;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      w.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw ConfigError("--weights: cannot parse '" + part + "'");
    }
  }
  if (w.empty()) throw ConfigError("--weights: empty list");
  return w;
}

void cmd_fuse(const ExperimentConfig& cfg, const Layout& layout, const std::string& only,
              const std::string& weights_flag) {
  const auto in = load_ingested(layout, cfg);
  std::vector<std::size_t> selected;
  for (std::size_t k = 0; k < cfg.fusions.size(); ++k)
    if (only.empty() || cfg.fusions[k].name == only) selected.push_back(k);
  if (selected.empty())
    throw ConfigError(only.empty() ? "no fusions declared" : "fusion '" + only + "' is not declared");
  if (!weights_flag.empty() && selected.size() != 1)
    throw ConfigError("--weights needs a single fusion; pick one with --fusion");

  for (auto idx : selected) {
    const auto& decl = cfg.fusions[idx];
    std::vector<std::unique_ptr<Scorer<float>>> owned;
    std::vector<const Scorer<float>*> components;
    for (const auto& c : decl.components) {
      owned.push_back(load_model(layout, c, in));
      components.push_back(owned.back().get());
    }

    json weights_report;
    std::vector<double> weights;
    if (!weights_flag.empty() || !decl.weights.empty()) {
      weights = weights_flag.empty() ? decl.weights : parse_weights(weights_flag);
      weights_report["searched"] = false;
    } else {
      const auto search = search_fusion_weights(components, in.val, &in.features, cfg.grid_step, cfg.train.eval_k);
      weights = search.weights;
      weights_report["searched"] = true;
      weights_report["val_hr"] = search.val_hr;
      auto& grid = weights_report["grid"] = json::array();
      for (const auto& [w, hr] : search.grid) grid.push_back({{"weights", w}, {"val_hr", hr}});
    }
    weights_report["weights"] = weights;
    auto fused = fuse<float>(components, weights);

    TrainReport report;
    report.stop_reason = "no_finetune";
    if (cfg.finetune_epochs > 0) {
      TrainConfig ft = cfg.train;
      ft.max_epochs = cfg.finetune_epochs;
      ft.seed = Rng::derive_seed(cfg.seed, kStreamFusion + idx);
      report = finetune_fused(fused, in.split, &in.features, &in.val, ft);
    }
    fs::create_directories(layout.checkpoints());
    save_checkpoint(fused, layout.checkpoint(decl.name).string());
    write_checkpoint_meta(layout, decl.name, ModelKind::kFused, in);
    save_train_outputs(layout, decl.name, report);
    write_text(layout.reports() / (decl.name + ".weights.json"), weights_report.dump(2) + "\n");
    std::ostringstream msg;
    msg << "fuse: " << decl.name << " weights";
    for (double w : weights) msg << ' ' << w;
    log(msg.str());
  }
}

void cmd_baseline(const ExperimentConfig& cfg, const Layout& layout) {
  const auto in = load_ingested(layout, cfg);
  fs::create_directories(layout.checkpoints());
  const auto pop = poprank_fit(in.split.train);
  save_checkpoint(pop, layout.checkpoint("poprank").string());
  write_checkpoint_meta(layout, "poprank", ModelKind::kPopRank, in);
  log("baseline: poprank");
  if (cfg.run_bpr) {
    Rng rng(Rng::derive_seed(cfg.seed, kStreamBpr));
    BprFitReport fit;
    const auto bpr = bpr_fit(in.split, cfg.bpr, rng, &fit);
    save_checkpoint(bpr, layout.checkpoint("bpr").string());
    write_checkpoint_meta(layout, "bpr", ModelKind::kBpr, in);
    write_stream(layout.reports() / "bpr.train.jsonl", [&](std::ostream& o) {
      for (std::size_t e = 0; e < fit.epoch_mean_loss.size(); ++e)
        o << json{{"epoch", e + 1}, {"mean_loss", fit.epoch_mean_loss[e]}}.dump() << '\n';
    });
    log("baseline: bpr");
  }
}

struct EvalOptions {
  int k = 10;
  std::string format = "table";
  bool reciprocal_hr = false;
  bool validation = false;
  std::vector<std::string> compare;
};

void cmd_evaluate(const ExperimentConfig& cfg, const Layout& layout, const EvalOptions& opts) {
  const auto in = load_ingested(layout, cfg);
  const auto& candidates = opts.validation ? in.val : in.test;
  const auto mode = opts.reciprocal_hr ? HitMode::kReciprocalK : HitMode::kIndicator;
  std::vector<EvalReport> reports;

  auto record = [&](EvalReport report) {
    write_text(layout.eval() / (report.model + ".json"), to_json(report, true).dump(2) + "\n");
    report.per_user.clear();
    reports.push_back(std::move(report));
  };

  if (fs::exists(layout.checkpoint("poprank"))) {
    check_checkpoint_meta(layout, "poprank", in);
    const auto pop = decode_poprank(read_file_bytes(layout.checkpoint("poprank").string()));
    record(evaluate([&](Index u, Index i) { return poprank_score(pop, u, i); }, candidates, opts.k, "poprank",
                    &in.split, mode));
  }
  if (fs::exists(layout.checkpoint("bpr"))) {
    check_checkpoint_meta(layout, "bpr", in);
    const auto bpr = decode_bpr(read_file_bytes(layout.checkpoint("bpr").string()));
    record(evaluate([&](Index u, Index i) { return bpr_score(bpr, u, i); }, candidates, opts.k, "bpr", &in.split,
                    mode));
  }
  std::vector<std::string> names;
  for (const auto& m : cfg.models) names.push_back(m.name);
  for (const auto& f : cfg.fusions) names.push_back(f.name);
  for (const auto& name : names) {
    if (!fs::exists(layout.checkpoint(name))) {
      log("evaluate: skipping " + name + " (no checkpoint)");
      continue;
    }
    const auto model = load_model(layout, name, in);
    auto report = evaluate(scorer_fn(*model, &in.features), candidates, opts.k, name, &in.split, mode);
    report.hybrid = model->kind() == ModelKind::kAux;
    if (const auto* fused = dynamic_cast<const FusedModel<float>*>(model.get()))
      for (std::size_t c = 0; c < fused->num_components(); ++c)
        report.hybrid = report.hybrid || fused->component(c).kind() == ModelKind::kAux;
    record(std::move(report));
  }
  if (reports.empty()) throw ProtocolError("nothing to evaluate (run `nhr pretrain` or `nhr baseline` first)");

  json summary = json::array();
  for (const auto& r : reports) summary.push_back(to_json(r));
  write_text(layout.eval() / "summary.json", summary.dump(2) + "\n");
  write_text(layout.eval() / "comparison.txt", comparison_table(reports));

  // Rows from other runs are shown but not written into this run's reports.
  for (const auto& path : opts.compare) {
    std::ifstream cin(path);
    if (!cin) throw ConfigError("--compare: cannot open " + path);
    try {
      const auto j = json::parse(cin);
      if (j.is_array())
        for (const auto& r : j) reports.push_back(eval_report_from_json(r));
      else
        reports.push_back(eval_report_from_json(j));
    } catch (const json::exception& e) {
      throw ConfigError("--compare " + path + ": " + e.what());
    }
  }
  if (opts.format == "json") {
    json out = json::array();
    for (const auto& r : reports) out.push_back(to_json(r));
    std::cout << out.dump(2) << '\n';
  } else {
    std::cout << comparison_table(reports);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Neural hybrid recommender experiments"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  EvalOptions eval_opts;
  bool k_given = false;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Experiment seed (overrides config)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option_function<int>(
      "--k", [&](int k) { eval_opts.k = k; k_given = true; }, "Cutoff for HR@k / NDCG@k (default 10)");
  app.add_option("--format", eval_opts.format, "Report format")->check(CLI::IsMember({"json", "table"}));

  auto* ingest = app.add_subcommand("ingest", "Parse, split, featurize and sample candidates");
  auto* pretrain = app.add_subcommand("pretrain", "Train every declared model");
  auto* fuse_cmd = app.add_subcommand("fuse", "Weight search, fusion and fine-tuning");
  std::string fusion_name, weights;
  fuse_cmd->add_option("--fusion", fusion_name, "Only this fusion");
  fuse_cmd->add_option("--weights", weights, "Comma-separated weights; skips the grid search");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Rank held-out candidates and print the comparison");
  evaluate_cmd->add_flag("--reciprocal-hr", eval_opts.reciprocal_hr, "Credit 1/k per hit instead of 1");
  evaluate_cmd->add_flag("--validation", eval_opts.validation, "Use validation instead of test candidates");
  evaluate_cmd->add_option("--compare", eval_opts.compare, "Extra report JSON files to include in the table");
  auto* baseline = app.add_subcommand("baseline", "Fit PopRank and BPR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto cfg = load_config(config_path);
    if (seed) {
      cfg.seed = *seed;
      cfg.train.seed = *seed;
    }
    if (!k_given) eval_opts.k = cfg.train.eval_k;
    if (eval_opts.k < 1) throw ConfigError("--k must be >= 1");
    const Layout layout{out_dir.empty() ? cfg.output : fs::path(out_dir)};

    if (ingest->parsed())
      cmd_ingest(cfg, layout);
    else if (pretrain->parsed())
      cmd_pretrain(cfg, layout);
    else if (fuse_cmd->parsed())
      cmd_fuse(cfg, layout, fusion_name, weights);
    else if (baseline->parsed())
      cmd_baseline(cfg, layout);
    else if (evaluate_cmd->parsed())
      cmd_evaluate(cfg, layout, eval_opts);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "nhr: error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "nhr: error: " << e.what() << '\n';
    return kExitData;
  } catch (const json::exception& e) {
    std::cerr << "nhr: error: " << e.what() << '\n';
    return kExitProtocol;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("nhr");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace nhr
