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
#include <string>
#include <vector>

namespace disco {

enum class ModuleKind { kFeedForward = 0, kAttention = 1, kConvolution = 2 };

const char* module_kind_name(ModuleKind kind);

/// Full architecture description. A model and its parameter count are
/// deterministic functions of this struct.
struct ModelConfig {
  int d_model = 256;
  int num_layers = 16;
  int output_dim = 30;
  int feature_dim = 80;
  int time_reduction = 4;

  int ff_expert_dim = 64;
  int ff_core_experts = 8;
  int ff_aug_experts = 12;

  int att_core_heads = 4;
  int att_aug_heads = 0;
  /// 0 means d_model / (att_core_heads + att_aug_heads).
  int att_head_dim = 0;
  bool rel_pos_bias = true;
  int rel_pos_max_distance = 16;

  int conv_channels_per_expert = 16;
  int conv_core_experts = 16;
  int conv_aug_experts = 0;
  int conv_kernel = 31;

  double dropout = 0.1;
  double ln_eps = 1e-5;
  bool macaron_ff = true;
  bool glu_pointwise = true;

  int head_dim() const;
  int total_heads() const { return att_core_heads + att_aug_heads; }
  int ff_dim() const { return (ff_core_experts + ff_aug_experts) * ff_expert_dim; }
  int conv_core_channels() const {
    return conv_core_experts * conv_channels_per_expert;
  }
  int conv_channels() const {
    return (conv_core_experts + conv_aug_experts) * conv_channels_per_expert;
  }
  int aug_groups(ModuleKind kind) const;
  bool has_augment() const {
    return ff_aug_experts > 0 || att_aug_heads > 0 || conv_aug_experts > 0;
  }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Stable "key=value" lines in fixed field order.
  std::string canonical_text() const;
  std::uint64_t digest() const;

  static ModelConfig parse_canonical(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named architecture presets: disco-ff, disco-att, disco-conv,
/// base-ff, base-att, base-conv.
ModelConfig model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

std::string digest_hex(std::uint64_t digest);

}  // namespace disco
