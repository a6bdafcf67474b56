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
#include <optional>
#include <string>

#include "nhr/baselines.hpp"
#include "nhr/models.hpp"

namespace nhr {

// Binary container shared by neural models and baselines, little-endian:
//
//   "NHR1" | u32 version | u32 kind
//   descriptor (kind specific, see below)
//   feature specs: u32 count, then per spec
//       u32 name_len, name, u8 entity, u8 kind, u32 vocab, u32 length, u32 dim
//   parameters: u32 count, then per parameter
//       u32 name_len, name, u32 rank, u32 dims[rank], f32 payload (row-major)
//
// Descriptors: GMF/MLP/BPR = u32 users, u32 items, u32 factors; Aux = u32 pf
// plus its own spec block; PopRank = u32 items; Fused = u32 n, then n nested
// (u32 kind, descriptor) entries, n f64 weights, u8 freeze flag.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Scorer<float>& model);
std::string encode_checkpoint(const PopRankModel& model);
std::string encode_checkpoint(const BprModel& model);

// Throws CheckpointError on bad magic, version, kind, shapes, or truncation.
// `expected` rejects a checkpoint of another kind.
std::unique_ptr<Scorer<float>> decode_model(const std::string& bytes, std::optional<ModelKind> expected = std::nullopt);
PopRankModel decode_poprank(const std::string& bytes);
BprModel decode_bpr(const std::string& bytes);
ModelKind peek_kind(const std::string& bytes);

void save_checkpoint(const Scorer<float>& model, const std::string& path);
void save_checkpoint(const PopRankModel& model, const std::string& path);
void save_checkpoint(const BprModel& model, const std::string& path);
std::unique_ptr<Scorer<float>> load_checkpoint(const std::string& path, std::optional<ModelKind> expected = std::nullopt);
std::string read_file_bytes(const std::string& path);

}  // namespace nhr
