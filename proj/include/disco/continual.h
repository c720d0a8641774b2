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

// Speaker adaptation: trainable-set plans, the distillation objective,
// per-speaker finetuning with delta checkpoints, and core/augment
// recombination.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "disco/checkpoint.h"
#include "disco/corpus.h"
#include "disco/disconformer.h"
#include "disco/registry.h"
#include "disco/training.h"

namespace disco {

enum class CLAlgorithm { kDisentangledCL, kFullFT, kKD, kFullFTEfficient, kKDEfficient };

const char* cl_algorithm_name(CLAlgorithm algorithm);
CLAlgorithm parse_cl_algorithm(const std::string& name);
bool is_kd(CLAlgorithm algorithm);
bool is_efficient(CLAlgorithm algorithm);

struct CLOptions {
  /// Augment groups per disentangled kind; kinds without augment groups are
  /// skipped.
  AugmentBudget k{2, 2, 12};
  double kd_lambda = 8.0;
  double kd_temperature = 1.0;
  /// Top encoder layers trained by the efficient variants.
  int efficient_layers = 0;
};

enum class InferenceDomain { kOriginal, kSpeaker };

struct CLPlan {
  CLAlgorithm algorithm = CLAlgorithm::kDisentangledCL;
  /// Sorted parameter ids.
  std::vector<ParamId> trainable;
  /// DisentangledCL: selected augment groups per kind, shared by all layers.
  LayerSelection groups;
  double kd_lambda = 0.0;
  double kd_temperature = 1.0;
  int efficient_layers = 0;
  std::uint64_t config_digest = 0;
  /// Sum of trainable parameter sizes, computed by build_cl_plan.
  Index num_params = 0;

  TrainableMask mask(int num_parameters) const;
  /// Speaker-domain inference (and finetuning) uses core + selected groups
  /// for DisentangledCL; original-domain inference always uses the core.
  Selection selection(const ModelConfig& config, InferenceDomain domain) const;

  std::string to_json() const;
  static CLPlan from_json(const std::string& text);
  friend bool operator==(const CLPlan&, const CLPlan&) = default;
};

/// Throws std::invalid_argument for k > n_a, DisentangledCL without augment
/// groups, efficient variants without a valid layer count, or KD with a
/// non-positive temperature.
CLPlan build_cl_plan(const ModelConfig& config, CLAlgorithm algorithm,
                     const CLOptions& options, Rng& rng);

/// sum_t KL(p_t || q_t) with p = softmax(student / T), q = softmax(teacher / T).
template <typename T>
Var<T> kd_divergence(const Var<T>& student_logits, const Tensor<T>& teacher_logits,
                     double temperature);

/// CTC(student) + lambda * kd_divergence. lambda == 0 skips the teacher.
template <typename T>
LossTerms<T> kd_loss(Tape<T>& tape, const DisConformer<T>& student,
                     const DisConformer<T>& teacher, const Tensor<T>& features,
                     const LabelSequence& target, double lambda, double temperature,
                     const Selection& selection, const ForwardOptions& options = {});

struct FinetuneResult {
  /// Delta checkpoint: the plan's trainable arrays at the best validation
  /// step, the base content digest and the plan in the metadata.
  Checkpoint speaker;
  LoopResult loop;
};

/// Finetunes `base` on one speaker's nested train split. Validation uses the
/// speaker's valid set under the plan's speaker-domain selection.
FinetuneResult run_finetune(const Checkpoint& base, const CLPlan& plan, const Corpus& corpus,
                            const std::string& speaker, const std::string& split,
                            const LoopConfig& loop,
                            std::optional<std::filesystem::path> out_dir = std::nullopt);

/// Base model with the delta's arrays applied. Refuses a mismatched base.
DisConformer<float> apply_delta(const Checkpoint& base, const Checkpoint& delta);
CLPlan plan_of(const Checkpoint& delta);

/// A parameter source for recombination: a checkpoint, or random init.
struct ParamSource {
  const Checkpoint* checkpoint = nullptr;
  std::uint64_t seed = 0;
};

/// Assembles a model of `config` taking core parameters from `core` and
/// augment parameters from `augment`. A checkpoint of the same config is
/// copied by name; a Base checkpoint whose modules are wider than the core
/// donates its leading columns to the core and the following ones to the
/// augment groups in order. Random sources use the pretraining initializer.
DisConformer<float> recombine(const ParamSource& core, const ParamSource& augment,
                              const ModelConfig& config);

}  // namespace disco
