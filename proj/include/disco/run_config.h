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

// Run configuration: an INI document with [model], [training], [cl], [data]
// and [eval] sections layered over a named preset.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "disco/continual.h"
#include "disco/corpus.h"
#include "disco/evalbench.h"
#include "disco/model_config.h"
#include "disco/training.h"

namespace disco {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string preset = "disco-ff";
  ModelConfig model;
  TrainConfig train;
  /// Finetuning loop; steps is the default for splits not in cl_split_steps.
  LoopConfig cl_loop;
  std::map<std::string, std::int64_t> cl_split_steps;
  CLOptions cl;
  /// Empty means: disentangled_cl for models with augment groups, the four
  /// baselines otherwise.
  std::vector<CLAlgorithm> cl_algorithms;
  /// The generator's feature_dim always follows model.feature_dim.
  GeneratorConfig data;
  std::vector<DecodeOptions> decodes{DecodeOptions{}};
  MedianKind median = MedianKind::kInterpolated;
  /// Empty means every train split of the corpus.
  std::vector<std::string> eval_splits;
  std::vector<double> kd_lambda_grid{0, 1, 2, 4, 8, 16, 32};

  /// Resolved config as INI text; load_config on it reproduces the config.
  std::string to_text() const;
  std::uint64_t digest() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;

  std::vector<CLAlgorithm> algorithms_for(const ModelConfig& model) const;
};

/// Full-size presets (disco-ff, disco-att, disco-conv, base-ff, base-att,
/// base-conv) and desk-scale presets (the same names prefixed "desk-", plus
/// desk-base-conv-wide, the recombination donor).
RunConfig run_preset(const std::string& name);
std::vector<std::string> run_preset_names();

/// Loads `path` (may be empty for "no file") over a preset, then applies
/// "section.key=value" overrides. The preset comes from a model.preset
/// override, else `preset`, else the file's [model] preset, else disco-ff.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {},
                      const std::string& preset = {});

/// Same as load_config with the document given as text.
RunConfig parse_config(const std::string& text,
                       const std::vector<std::string>& overrides = {},
                       const std::string& preset = {});

/// Root directory for outputs: $DISCO_OUTPUT_ROOT or ./disco_out.
std::filesystem::path default_output_root();

}  // namespace disco
