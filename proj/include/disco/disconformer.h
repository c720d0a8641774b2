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

#include <cstdint>
#include <vector>

#include "disco/autodiff.h"
#include "disco/model_config.h"
#include "disco/params.h"
#include "disco/random.h"
#include "disco/registry.h"
#include "disco/selector.h"

namespace disco {

struct ForwardOptions {
  /// Enables dropout. Requires `rng` when the model's dropout is nonzero.
  bool training = false;
  Rng* rng = nullptr;
  /// Per-parameter trainability; nullptr means every parameter is trainable.
  const TrainableMask* trainable = nullptr;
  /// Binds every parameter as a constant (inference).
  bool no_grad = false;
};

/// Disentangled Conformer encoder with CTC output head.
///
/// Module-level forwards (ff/att/conv) take an already normalized input and
/// return the module output without residual; the block applies pre-norm,
/// residual scaling and dropout. Active index sets are validated and then
/// applied in ascending order, so results do not depend on caller order.
template <typename T>
class DisConformer {
 public:
  explicit DisConformer(const ModelConfig& config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  const DisentangledParamRegistry& registry() const { return registry_; }
  const std::vector<ParamSpec>& specs() const { return specs_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  /// Re-draws every parameter from its initializer.
  void init(std::uint64_t seed);
  /// Re-draws the given augment groups (all layers, all slots of `kind`).
  void reinit_augment(ModuleKind kind, const std::vector<int>& groups,
                      std::uint64_t seed);

  Var<T> forward(Tape<T>& tape, const Tensor<T>& features,
                 const Selection& selection,
                 const ForwardOptions& options = {}) const;

  /// Eval-mode logits [T' x V] without gradient tracking.
  Tensor<T> infer(const Tensor<T>& features, const Selection& selection) const;

  Var<T> ff_forward(Tape<T>& tape, const Var<T>& x, int layer, ModuleSlot slot,
                    const std::vector<int>& active,
                    const ForwardOptions& options = {}) const;
  Var<T> att_forward(Tape<T>& tape, const Var<T>& x, int layer,
                     const std::vector<int>& active,
                     const ForwardOptions& options = {}) const;
  Var<T> conv_forward(Tape<T>& tape, const Var<T>& x, int layer,
                      const std::vector<int>& active,
                      const ForwardOptions& options = {}) const;

  /// Output length for an input of `frames` frames.
  Index output_frames(Index frames) const;

 private:
  Var<T> bind(Tape<T>& tape, ParamId id, const ForwardOptions& options) const;
  Var<T> bind(Tape<T>& tape, const std::string& name,
              const ForwardOptions& options) const;
  std::vector<int> checked(const std::vector<int>& active, ModuleKind kind) const;
  Var<T> block(Tape<T>& tape, Var<T> x, int layer, const LayerSelection& sel,
               const ForwardOptions& options) const;
  Var<T> drop(const Var<T>& x, const ForwardOptions& options) const;

  ModelConfig config_;
  std::vector<ParamSpec> specs_;
  DisentangledParamRegistry registry_;
  ParameterStore<T> store_;
};

/// Xavier-uniform (or constant) initialization of one parameter, seeded by
/// (seed, name). Shared with recombination so random augment groups use the
/// pretraining initializer family.
template <typename T>
Tensor<T> init_param(const ParamSpec& spec, std::uint64_t seed);

extern template class DisConformer<float>;
extern template class DisConformer<double>;

}  // namespace disco
