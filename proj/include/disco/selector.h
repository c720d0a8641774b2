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

#include <vector>

#include "disco/model_config.h"
#include "disco/random.h"

namespace disco {

/// Active augment group indices for one block. FF indices apply to both
/// macaron halves.
struct LayerSelection {
  std::vector<int> ff;
  std::vector<int> att;
  std::vector<int> conv;

  std::vector<int>& of(ModuleKind kind);
  const std::vector<int>& of(ModuleKind kind) const;
  friend bool operator==(const LayerSelection&, const LayerSelection&) = default;
};

struct Selection {
  std::vector<LayerSelection> layers;

  static Selection core_only(const ModelConfig& config);
  /// Every augment group of every module.
  static Selection full(const ModelConfig& config);
  /// The same index sets in every layer.
  static Selection uniform(const ModelConfig& config, const LayerSelection& sets);

  friend bool operator==(const Selection&, const Selection&) = default;
};

enum class SizeLadder {
  /// {1, 2, 4, ...} below n_a, plus n_a itself.
  kPowersOfTwo,
  /// Every size 1..n_a.
  kAllSizes,
};

struct SelectorOptions {
  SizeLadder ladder = SizeLadder::kPowersOfTwo;
  /// Independent draw per layer instead of one draw shared by all layers.
  bool per_layer = false;
};

std::vector<int> size_ladder(int n_a, SizeLadder ladder = SizeLadder::kPowersOfTwo);

/// Two-stage draw: a size uniformly from the ladder, then a uniformly random
/// subset of that size. Returns sorted distinct indices in [0, n_a).
std::vector<int> sample_selector(int n_a, Rng& rng,
                                 SizeLadder ladder = SizeLadder::kPowersOfTwo);

/// Draws a Selection for every disentangled module kind in `config`.
Selection sample_selection(const ModelConfig& config, Rng& rng,
                           const SelectorOptions& options = {});

}  // namespace disco
