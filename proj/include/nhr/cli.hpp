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
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nhr/baselines.hpp"
#include "nhr/data.hpp"
#include "nhr/training.hpp"

#include "json.hpp"

namespace nhr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitProtocol = 4;
inline constexpr int kExitOther = 1;

// Exit status for an exception escaping a command.
int exit_code(const std::exception& e);

struct FeatureDecl {
  std::string name;
  Entity entity = Entity::kItem;
  FeatureKind kind = FeatureKind::kCategorical;
  // Categorical: TSV file. Text: directory of <raw_id>.txt files.
  std::filesystem::path source;
  std::int32_t embedding_dim = 8;
  std::int32_t hash_space = kDefaultHashSpace;
  std::int32_t input_length = 0;  // 0 = derive from data
};

struct FusionDecl {
  std::string name;
  std::vector<std::string> components;
  std::vector<double> weights;  // empty = grid search
};

struct ExperimentConfig {
  std::filesystem::path interactions;
  InteractionFormat format = InteractionFormat::kMovieLensDat;
  std::vector<FeatureDecl> features;
  std::vector<ModelDecl> models;
  std::vector<FusionDecl> fusions;
  TrainConfig train;
  // Fine-tuning after fusion; defaults to `train` with its own epoch budget.
  int finetune_epochs = 30;
  double grid_step = 0.1;
  int eval_negatives = 100;
  BprConfig bpr;
  bool run_bpr = true;
  std::uint64_t seed = 42;
  std::filesystem::path output = "nhr_out";
  // Canonical dump of the dataset section, stored in the manifest.
  std::string dataset_json;

  // Structural checks; `check_inputs` also requires the raw input paths.
  void validate(bool check_inputs = false) const;
};

// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Entry point of the `nhr` executable. Returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace nhr
