// Copyright 2026 The disco-asr Authors.
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

// Checkpoint file layout (all integers little-endian):
//
//   char[8]  magic "DISCOCKP"
//   u32      format version (1)
//   u32      kind (0 = full model, 1 = speaker delta)
//   u64      model config digest
//   str      model config canonical text
//   str      vocabulary symbols (index order, blank first)
//   i64      step
//   u64      base content digest (delta checkpoints; 0 otherwise)
//   str      metadata (JSON text: seeds, data cursor, plan, run config)
//   u32      number of parameter arrays, then per array:
//              str name, u8 dtype (0 = float32), u32 rank, u64 dims[rank],
//              float32 data[prod(dims)]
//   u8       optimizer present; if 1:
//              i64 adam step, f64 beta1, f64 beta2, f64 eps,
//              u32 count, then per entry: str name, m array, v array
//              (arrays encoded as above without the name)
//
// where str = u32 byte length + bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "disco/disconformer.h"
#include "disco/model_config.h"
#include "disco/tensor.h"

namespace disco {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CheckpointKind : std::uint32_t { kModel = 0, kSpeakerDelta = 1 };

struct NamedArray {
  std::string name;
  Tensor<float> value;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct OptimizerBlob {
  std::int64_t step = 0;
  AdamConfig config;
  std::vector<std::string> names;
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;
  friend bool operator==(const OptimizerBlob&, const OptimizerBlob&) = default;
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::kModel;
  ModelConfig config;
  std::string vocabulary;
  std::int64_t step = 0;
  std::uint64_t base_digest = 0;
  std::string meta = "{}";
  std::vector<NamedArray> params;
  bool has_optimizer = false;
  OptimizerBlob optimizer;

  std::uint64_t config_digest() const { return config.digest(); }
  /// Digest over parameter names, shapes and bytes.
  std::uint64_t content_digest() const;
  const NamedArray* find(const std::string& name) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Full-model checkpoint of every parameter in registry order.
Checkpoint snapshot(const DisConformer<float>& model, std::int64_t step = 0,
                    std::string meta = "{}");

/// Copies a full checkpoint into `model`. Refuses a config digest or
/// vocabulary mismatch and any missing or misshapen array.
void load_into(DisConformer<float>& model, const Checkpoint& ckpt);

/// Builds a model from a full checkpoint.
DisConformer<float> model_from(const Checkpoint& ckpt);

}  // namespace disco
