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

#include "disco/selector.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace disco {

std::vector<int>& LayerSelection::of(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::kAttention:
      return att;
    case ModuleKind::kConvolution:
      return conv;
    default:
      return ff;
  }
}

const std::vector<int>& LayerSelection::of(ModuleKind kind) const {
  return const_cast<LayerSelection*>(this)->of(kind);
}

Selection Selection::core_only(const ModelConfig& config) {
  Selection s;
  s.layers.resize(config.num_layers);
  return s;
}

Selection Selection::full(const ModelConfig& config) {
  LayerSelection sets;
  for (ModuleKind k : {ModuleKind::kFeedForward, ModuleKind::kAttention,
                       ModuleKind::kConvolution}) {
    sets.of(k).resize(config.aug_groups(k));
    std::iota(sets.of(k).begin(), sets.of(k).end(), 0);
  }
  return uniform(config, sets);
}

Selection Selection::uniform(const ModelConfig& config,
                             const LayerSelection& sets) {
  Selection s;
  s.layers.assign(config.num_layers, sets);
  return s;
}

std::vector<int> size_ladder(int n_a, SizeLadder ladder) {
  if (n_a < 1) throw std::invalid_argument("size_ladder: n_a must be >= 1");
  std::vector<int> sizes;
  if (ladder == SizeLadder::kAllSizes) {
    sizes.resize(n_a);
    std::iota(sizes.begin(), sizes.end(), 1);
    return sizes;
  }
  for (int s = 1; s < n_a; s *= 2) sizes.push_back(s);
  sizes.push_back(n_a);
  return sizes;
}

std::vector<int> sample_selector(int n_a, Rng& rng, SizeLadder ladder) {
  const std::vector<int> sizes = size_ladder(n_a, ladder);
  const int n = sizes[rng.uniform_int(sizes.size())];
  std::vector<int> pool(n_a);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: the first n slots become a uniform n-subset.
  for (int i = 0; i < n; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(n_a - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Selection sample_selection(const ModelConfig& config, Rng& rng,
                           const SelectorOptions& options) {
  const ModuleKind kinds[] = {ModuleKind::kFeedForward, ModuleKind::kAttention,
                              ModuleKind::kConvolution};
  if (!options.per_layer) {
    LayerSelection sets;
    for (ModuleKind k : kinds) {
      const int n_a = config.aug_groups(k);
      if (n_a > 0) sets.of(k) = sample_selector(n_a, rng, options.ladder);
    }
    return Selection::uniform(config, sets);
  }
  Selection s = Selection::core_only(config);
  for (auto& layer : s.layers) {
    for (ModuleKind k : kinds) {
      const int n_a = config.aug_groups(k);
      if (n_a > 0) layer.of(k) = sample_selector(n_a, rng, options.ladder);
    }
  }
  return s;
}

}  // namespace disco
