// Copyright 2026 The DnD Authors
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
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnd/autodiff/array.hpp"
#include "dnd/autodiff/parameter.hpp"
#include "dnd/trainer/optimizer.hpp"

namespace dnd::train {

enum class Stage { kDenoise, kDistillGraph, kDistillNode, kFinetune, kContrastive };

std::string stage_name(Stage s);
// Throws ConfigError for unknown names.
Stage parse_stage(const std::string& name);

struct NamedTensor {
  std::string name;
  ad::Array<double> value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Binary layout, all integers little-endian:
//   "DNDCKPT1" | u64 metadata length | metadata JSON | u64 tensor count |
//   tensors (u32 name length, name, u32 rank, u64 dims..., reals) |
//   32-byte SHA-256 of every preceding byte.
// Reals are 32- or 64-bit IEEE per precision_bits.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int version = kFormatVersion;
  Stage stage = Stage::kDenoise;
  int precision_bits = 32;
  std::int64_t step = 0;
  int epoch = 0;
  std::string rng_state;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::vector<NamedTensor> parameters;
  // Adam moments, keyed "m/<param>" and "v/<param>".
  std::vector<NamedTensor> moments;

  const NamedTensor* find_parameter(const std::string& name) const;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Throws CorruptionError on bad magic, truncation or hash mismatch and
// IncompatibleError on a different format version.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

// Writes through a temporary file and rename. Throws IoError.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Hex SHA-256 of the serialized container (the trailing hash).
std::string content_hash(const Checkpoint& ckpt);
// Hex SHA-256 over names, shapes and values of parameters whose names start
// with prefix. Independent of metadata.
std::string parameter_hash(const Checkpoint& ckpt, const std::string& prefix = {});

// Throws IncompatibleError naming the stage when it is not in allowed.
void require_stage(const Checkpoint& ckpt, std::initializer_list<Stage> allowed,
                   const std::string& consumer);

template <typename T>
void capture_parameters(const ad::ParameterStore<T>& store, Checkpoint& ckpt);

// Copies every parameter of the store from the checkpoint. Throws
// IncompatibleError on a missing name or a shape mismatch.
template <typename T>
void restore_parameters(const Checkpoint& ckpt, ad::ParameterStore<T>& store);

template <typename T>
void capture_optimizer(const AdamW<T>& optimizer, Checkpoint& ckpt);
template <typename T>
void restore_optimizer(const Checkpoint& ckpt, AdamW<T>& optimizer);

}  // namespace dnd::train
