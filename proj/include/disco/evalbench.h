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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disco/checkpoint.h"
#include "disco/continual.h"
#include "disco/corpus.h"
#include "disco/disconformer.h"

namespace disco {

enum class DecodeMode { kGreedy, kBeam };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kGreedy;
  int beam = 8;
  std::string name() const;
  static DecodeOptions parse(const std::string& text);
};

struct UtteranceResult {
  std::string id;
  std::string hypothesis;
  std::size_t errors = 0;
  std::size_t words = 0;
  double loss = 0.0;
};

struct EvalResult {
  /// Pooled: total edit distance over total reference words.
  double wer = 0.0;
  std::size_t errors = 0;
  std::size_t words = 0;
  /// Mean per-utterance CTC loss.
  double mean_loss = 0.0;
  std::vector<UtteranceResult> utterances;
};

/// Produces [T' x V] log-probabilities for an utterance.
using Emitter = std::function<Tensor<float>(const Utterance&)>;

EvalResult evaluate(const Emitter& emit, const std::vector<const Utterance*>& utterances,
                    const DecodeOptions& decode = {});
EvalResult evaluate(const DisConformer<float>& model, const Selection& selection,
                    const std::vector<const Utterance*>& utterances,
                    const DecodeOptions& decode = {});

enum class MedianKind { kInterpolated, kLower };

double speaker_aggregate(const std::vector<double>& wers,
                         MedianKind kind = MedianKind::kInterpolated);

struct SpeakerResult {
  std::string speaker;
  double wer = 0.0;
  double wer_orig = 0.0;
  double loss_orig = 0.0;
  std::size_t errors = 0;
  std::size_t words = 0;
  std::int64_t best_step = 0;
  std::string checkpoint_digest;
};

struct BenchmarkRow {
  std::string model;
  /// "none" for the no-finetuning row.
  std::string algorithm;
  /// "0hr" for the no-finetuning row.
  std::string split;
  std::string decode;
  Index cl_params = 0;
  std::string config_digest;
  std::uint64_t seed = 0;
  /// Extra row parameters, e.g. "kd_lambda=8".
  std::string tag;
  std::vector<SpeakerResult> speakers;
  double wer_lc = 0.0;
  double wer_orig = 0.0;
  double loss_orig = 0.0;
  bool failed = false;
  std::string error;
};

struct BenchmarkReport {
  std::string run_config;
  std::uint64_t seed = 0;
  std::string median = "interpolated";
  std::vector<BenchmarkRow> rows;

  bool ok() const;
  const BenchmarkRow* find(const std::string& model, const std::string& algorithm,
                           const std::string& split, const std::string& tag = {}) const;
  std::string to_json() const;
  std::string to_table() const;
};

struct ModelEntry {
  std::string label;
  const Checkpoint* checkpoint = nullptr;
  std::vector<CLAlgorithm> algorithms;
  CLOptions cl;
  std::string tag;
};

struct BenchmarkSpec {
  std::vector<ModelEntry> models;
  std::vector<std::string> splits;
  /// Empty means every target speaker.
  std::vector<std::string> speakers;
  std::vector<DecodeOptions> decodes{DecodeOptions{}};
  LoopConfig loop;
  /// Finetuning steps per split; splits not listed use loop.steps.
  std::map<std::string, std::int64_t> steps;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool zero_hour_rows = true;
  MedianKind median = MedianKind::kInterpolated;
  std::string run_config;
  /// JSON object stored as "provenance" in every speaker checkpoint's meta.
  std::string provenance = "{}";
  /// Speaker checkpoints go to out_dir/speakers/<model>/<algorithm>/<split>/.
  std::optional<std::filesystem::path> out_dir;
};

/// Finetunes every (model, algorithm, split, speaker) cell in a worker pool
/// and aggregates rows in a fixed order. A failed speaker marks its row
/// failed; other rows still complete.
BenchmarkReport run_benchmark(const Corpus& corpus, const BenchmarkSpec& spec);

enum class AblationKind { kKdLambda, kRecombination };

struct AblationSpec {
  AblationKind kind = AblationKind::kKdLambda;
  /// kKdLambda: lambda values, finetuned with KD on `base`.
  std::vector<double> lambdas{0, 1, 2, 4, 8, 16, 32};
  /// kRecombination: the narrow Base donor, the wide Base donor (core and
  /// augment widths as columns) and the disentangled model.
  const Checkpoint* base = nullptr;
  const Checkpoint* wide_base = nullptr;
  const Checkpoint* disco = nullptr;
  CLOptions cl;
  BenchmarkSpec bench;
};

BenchmarkReport run_ablations(const Corpus& corpus, const AblationSpec& spec);

}  // namespace disco
