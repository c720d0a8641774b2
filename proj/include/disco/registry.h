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

// Core/augment partition of model parameters. Parameter shapes are declared
// once (build_param_specs) and both model construction and parameter
// counting consume that declaration.

#include <string>
#include <vector>

#include "disco/model_config.h"
#include "disco/params.h"
#include "disco/tensor.h"

namespace disco {

/// Per-layer module slots. FF1/FF2 are the two macaron feed-forward halves.
enum class ModuleSlot { kFF1 = 0, kAtt = 1, kConv = 2, kFF2 = 3 };
inline constexpr int kNumSlots = 4;

const char* slot_name(ModuleSlot slot);
ModuleKind slot_kind(ModuleSlot slot);

enum class InitKind { kXavier, kZeros, kOnes };

/// Where a parameter lives in the partition. layer == -1 marks the
/// frontend / output head, in_module == false a per-block norm; group == -1
/// marks core membership.
struct ParamRole {
  int layer = -1;
  ModuleSlot slot = ModuleSlot::kFF1;
  int group = -1;
  bool in_module = true;
  bool is_augment() const { return group >= 0; }
};

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamRole role;
  InitKind init = InitKind::kXavier;
  int fan_in = 0;
  int fan_out = 0;
};

std::vector<ParamSpec> build_param_specs(const ModelConfig& config);

struct ModuleParams {
  bool present = false;
  std::vector<ParamId> core;
  std::vector<std::vector<ParamId>> groups;
};

class DisentangledParamRegistry {
 public:
  DisentangledParamRegistry() = default;
  /// `specs[i]` describes ParamId i.
  DisentangledParamRegistry(const ModelConfig& config,
                            const std::vector<ParamSpec>& specs);

  int num_layers() const { return static_cast<int>(layers_.size()); }
  const ModuleParams& module(int layer, ModuleSlot slot) const {
    return layers_.at(layer).at(static_cast<int>(slot));
  }
  /// Core parameters outside any module (frontend, head, block norms).
  const std::vector<ParamId>& shared_core() const { return shared_core_; }
  const ParamRole& role(ParamId id) const { return roles_.at(id); }
  bool is_augment(ParamId id) const { return roles_.at(id).is_augment(); }
  int size() const { return static_cast<int>(roles_.size()); }

  std::vector<ParamId> core_params() const;
  std::vector<ParamId> augment_params() const;
  /// Parameters of the given augment group indices for every layer and
  /// every slot of `kind`.
  std::vector<ParamId> group_params(ModuleKind kind,
                                    const std::vector<int>& groups) const;
  /// All parameters of layers [first, num_layers).
  std::vector<ParamId> layer_params(int first_layer) const;

  /// Checks the partition invariants: each parameter in exactly one of core
  /// or one augment group; group counts match the config.
  void validate(const ModelConfig& config) const;

 private:
  std::vector<std::vector<ModuleParams>> layers_;
  std::vector<ParamId> shared_core_;
  std::vector<ParamRole> roles_;
};

/// Number of augment groups kept per disentangled module kind.
struct AugmentBudget {
  int ff = 0;
  int att = 0;
  int conv = 0;
  int get(ModuleKind kind) const;
};

enum class CountMode { kCoreOnly, kDeployed, kFull };

/// Exact parameter count from the declared shapes. kDeployed keeps the
/// core plus min(k, n_a) groups per disentangled module per layer.
Index count_params(const ModelConfig& config, CountMode mode,
                   const AugmentBudget& budget = {});

/// Size of one augment group of `kind` in a single module instance.
Index augment_group_size(const ModelConfig& config, ModuleKind kind);

}  // namespace disco
