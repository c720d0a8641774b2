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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "disco/autodiff.h"
#include "disco/checkpoint.h"
#include "disco/corpus.h"
#include "disco/disconformer.h"
#include "disco/selector.h"
#include "disco/vocabulary.h"

namespace disco {

// ------------------------------------------------------------ optimizer ---

template <typename T>
struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  /// Per-parameter moments; empty until the parameter is first updated.
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One Adam update with bias correction. Parameters with mask[id] == false
/// are untouched, moments included. Empty gradient tensors count as zero.
template <typename T>
void adam_step(ParameterStore<T>& params, OptimizerState<T>& state,
               const GradBuffer<T>& grads, const TrainableMask& mask, double lr);

OptimizerBlob export_optimizer(const OptimizerState<float>& state,
                               const ParameterStore<float>& params);
OptimizerState<float> import_optimizer(const OptimizerBlob& blob,
                                       const ParameterStore<float>& params);

// ------------------------------------------------------------- schedule ---

enum class StageKind { kWarmupLinear, kConst, kDecayLinear };

struct ScheduleStage {
  StageKind kind = StageKind::kConst;
  double fraction = 0.0;
  /// Multipliers of the peak lr at the stage's start and end.
  double start = 1.0;
  double end = 1.0;
};

struct ScheduleSpec {
  std::int64_t total_steps = 0;
  std::vector<ScheduleStage> stages;

  /// Throws unless fractions sum to one and stage endpoints join up.
  void validate() const;

  /// Warmup 8% (0 -> 1), const 32%, decay 40% (1 -> floor), const 20%.
  static ScheduleSpec pretrain(std::int64_t total_steps, double floor = 0.05);
  /// Const 40%, decay 40% (1 -> floor), const 20%.
  static ScheduleSpec continual(std::int64_t total_steps, double floor = 0.05);
  static ScheduleSpec named(const std::string& name, std::int64_t total_steps,
                            double floor = 0.05);
};

/// Piecewise-linear lr at `step` in [0, total_steps].
double lr_at(const ScheduleSpec& schedule, std::int64_t step, double peak_lr);

// --------------------------------------------------------- spec augment ---

struct SpecAugmentConfig {
  int freq_masks = 2;
  int freq_width = 27;
  int time_masks = 2;
  int time_width = 100;
  /// Use exactly the max width instead of a uniform draw in [0, width].
  bool fixed_width = false;
};

/// Zeroes frequency bands then time bands. Widths are clamped to the input.
template <typename T>
Tensor<T> spec_augment(const Tensor<T>& features, const SpecAugmentConfig& config,
                       Rng& rng);

// --------------------------------------------------------------- losses ---

template <typename T>
struct LossTerms {
  Var<T> total;
  std::vector<std::pair<std::string, double>> terms;
};

/// CTC on the core alone plus alpha times CTC on core + `draw`, on one tape.
/// alpha == 0 skips the second forward.
template <typename T>
LossTerms<T> netaug_loss(Tape<T>& tape, const DisConformer<T>& model,
                         const Tensor<T>& features, const LabelSequence& target,
                         double alpha, const Selection& draw,
                         const ForwardOptions& options = {});

// ------------------------------------------------------------- training ---

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-utterance objective. Receives the (already augmented) features and
/// training-mode options whose rng is local to the example; selector draws
/// and dropout consume it.
using ObjectiveFn = std::function<LossTerms<float>(
    Tape<float>&, const DisConformer<float>&, const Utterance&, const Tensor<float>&,
    const ForwardOptions&)>;

struct LoopConfig {
  std::int64_t steps = 2000;
  int batch_size = 8;
  Index max_batch_frames = 2000;
  double peak_lr = 4e-4;
  double lr_floor = 0.05;
  std::string schedule = "pretrain";
  AdamConfig adam;
  bool spec_augment = true;
  SpecAugmentConfig augment;
  std::int64_t eval_every = 100;
  std::uint64_t seed = 0;
  bool debug_numerics = false;
};

struct LoopSpec {
  LoopConfig config;
  std::vector<const Utterance*> train;
  /// Validation pool; empty disables checkpoint selection.
  std::vector<const Utterance*> dev;
  /// Selection used for validation decoding.
  Selection eval_selection;
  TrainableMask mask;
  ObjectiveFn objective;
  /// When set: metrics.jsonl, last.ckpt and best.ckpt live here.
  std::optional<std::filesystem::path> out_dir;
  /// Continue from out_dir/last.ckpt when present.
  bool resume = false;
  /// Stop (and save last.ckpt) after this many steps; -1 runs to the end.
  std::int64_t stop_after = -1;
  /// Opaque JSON merged into checkpoint metadata for provenance.
  std::string provenance = "{}";
};

struct MetricsRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  std::optional<double> dev_wer;

  std::string to_json() const;
};

struct LoopResult {
  /// Parameters at the best validation step (the final ones without a dev set).
  Checkpoint best;
  std::int64_t best_step = 0;
  double best_dev_wer = 0.0;
  Checkpoint last;
  std::vector<MetricsRecord> log;
  bool completed = false;
};

/// Mini-batch training: each step averages per-utterance objectives over a
/// batch, takes one masked Adam step and periodically decodes the dev pool.
/// Per-example randomness derives from (seed, step, position) so a resumed
/// run replays the uninterrupted one exactly.
LoopResult run_training_loop(DisConformer<float>& model, const LoopSpec& spec);

/// Pooled greedy WER of `model` under `selection` over `utterances`.
double greedy_wer(const DisConformer<float>& model, const Selection& selection,
                  const std::vector<const Utterance*>& utterances);

struct TrainConfig {
  LoopConfig loop;
  /// Weight of the core + augment term; ignored for models without augment.
  double alpha = 1.0;
  SelectorOptions selector;
};

/// General-ASR training on the original domain: NetAug for disentangled
/// models, plain CTC for Base models; validation on orig-dev with core-only
/// decoding.
LoopResult train(DisConformer<float>& model, const Corpus& corpus,
                 const TrainConfig& config,
                 std::optional<std::filesystem::path> out_dir = std::nullopt,
                 bool resume = false, std::int64_t stop_after = -1,
                 const std::string& provenance = "{}");

}  // namespace disco
