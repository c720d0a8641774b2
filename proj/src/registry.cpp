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

#include "disco/registry.h"

#include <algorithm>
#include <stdexcept>

namespace disco {

const char* slot_name(ModuleSlot slot) {
  switch (slot) {
    case ModuleSlot::kFF1:
      return "ff1";
    case ModuleSlot::kAtt:
      return "att";
    case ModuleSlot::kConv:
      return "conv";
    case ModuleSlot::kFF2:
      return "ff2";
  }
  return "?";
}

ModuleKind slot_kind(ModuleSlot slot) {
  switch (slot) {
    case ModuleSlot::kAtt:
      return ModuleKind::kAttention;
    case ModuleSlot::kConv:
      return ModuleKind::kConvolution;
    default:
      return ModuleKind::kFeedForward;
  }
}

int AugmentBudget::get(ModuleKind kind) const {
  switch (kind) {
    case ModuleKind::kFeedForward:
      return ff;
    case ModuleKind::kAttention:
      return att;
    case ModuleKind::kConvolution:
      return conv;
  }
  return 0;
}

namespace {

class SpecBuilder {
 public:
  explicit SpecBuilder(std::vector<ParamSpec>& out) : out_(out) {}

  void add(std::string name, Shape shape, ParamRole role, InitKind init,
           int fan_in = 0, int fan_out = 0) {
    out_.push_back({std::move(name), std::move(shape), role, init, fan_in,
                    fan_out});
  }

 private:
  std::vector<ParamSpec>& out_;
};

std::string prefix(int layer, ModuleSlot slot, int group) {
  std::string p = "layer" + std::to_string(layer) + "/" + slot_name(slot) + "/";
  p += group < 0 ? "core" : "aug" + std::to_string(group);
  return p + "/";
}

void ff_specs(const ModelConfig& c, int layer, ModuleSlot slot,
              SpecBuilder& b) {
  const int d = c.d_model, fa = c.ff_expert_dim;
  const int fc = c.ff_core_experts * fa, f = c.ff_dim();
  ParamRole core{layer, slot, -1};
  const std::string cp = prefix(layer, slot, -1);
  b.add(cp + "ln_g", {d}, core, InitKind::kOnes);
  b.add(cp + "ln_b", {d}, core, InitKind::kZeros);
  b.add(cp + "w1", {d, fc}, core, InitKind::kXavier, d, f);
  b.add(cp + "b1", {fc}, core, InitKind::kZeros);
  b.add(cp + "w2", {fc, d}, core, InitKind::kXavier, f, d);
  b.add(cp + "b2", {d}, core, InitKind::kZeros);
  for (int i = 0; i < c.ff_aug_experts; ++i) {
    ParamRole aug{layer, slot, i};
    const std::string ap = prefix(layer, slot, i);
    b.add(ap + "w1", {d, fa}, aug, InitKind::kXavier, d, f);
    b.add(ap + "b1", {fa}, aug, InitKind::kZeros);
    b.add(ap + "w2", {fa, d}, aug, InitKind::kXavier, f, d);
  }
}

void head_specs(const ModelConfig& c, const std::string& p, ParamRole role,
                SpecBuilder& b) {
  const int d = c.d_model, dk = c.head_dim(), hd = c.total_heads() * dk;
  b.add(p + "wq", {d, dk}, role, InitKind::kXavier, d, hd);
  b.add(p + "wk", {d, dk}, role, InitKind::kXavier, d, hd);
  b.add(p + "wv", {d, dk}, role, InitKind::kXavier, d, hd);
  b.add(p + "wo", {dk, d}, role, InitKind::kXavier, hd, d);
  if (c.rel_pos_bias) {
    b.add(p + "rel", {2 * c.rel_pos_max_distance + 1}, role, InitKind::kZeros);
  }
}

void att_specs(const ModelConfig& c, int layer, SpecBuilder& b) {
  const int d = c.d_model;
  const ModuleSlot slot = ModuleSlot::kAtt;
  ParamRole core{layer, slot, -1};
  const std::string cp = prefix(layer, slot, -1);
  b.add(cp + "ln_g", {d}, core, InitKind::kOnes);
  b.add(cp + "ln_b", {d}, core, InitKind::kZeros);
  for (int h = 0; h < c.att_core_heads; ++h) {
    head_specs(c, cp + "head" + std::to_string(h) + "_", core, b);
  }
  b.add(cp + "bo", {d}, core, InitKind::kZeros);
  for (int i = 0; i < c.att_aug_heads; ++i) {
    head_specs(c, prefix(layer, slot, i), ParamRole{layer, slot, i}, b);
  }
}

void conv_channel_specs(const ModelConfig& c, const std::string& p,
                        ParamRole role, int ch, SpecBuilder& b) {
  const int d = c.d_model, k = c.conv_kernel, total = c.conv_channels();
  b.add(p + "pc1_wv", {d, ch}, role, InitKind::kXavier, d, 2 * total);
  b.add(p + "pc1_wg", {d, ch}, role, InitKind::kXavier, d, 2 * total);
  b.add(p + "pc1_bv", {ch}, role, InitKind::kZeros);
  b.add(p + "pc1_bg", {ch}, role, InitKind::kZeros);
  b.add(p + "dc_w", {ch, k}, role, InitKind::kXavier, k, k);
  b.add(p + "dc_b", {ch}, role, InitKind::kZeros);
  b.add(p + "norm_g", {ch}, role, InitKind::kOnes);
  b.add(p + "norm_b", {ch}, role, InitKind::kZeros);
  b.add(p + "pc2_w", {ch, d}, role, InitKind::kXavier, total, d);
}

void conv_specs(const ModelConfig& c, int layer, SpecBuilder& b) {
  const int d = c.d_model;
  const ModuleSlot slot = ModuleSlot::kConv;
  ParamRole core{layer, slot, -1};
  const std::string cp = prefix(layer, slot, -1);
  b.add(cp + "ln_g", {d}, core, InitKind::kOnes);
  b.add(cp + "ln_b", {d}, core, InitKind::kZeros);
  conv_channel_specs(c, cp, core, c.conv_core_channels(), b);
  b.add(cp + "pc2_b", {d}, core, InitKind::kZeros);
  for (int i = 0; i < c.conv_aug_experts; ++i) {
    conv_channel_specs(c, prefix(layer, slot, i), ParamRole{layer, slot, i},
                       c.conv_channels_per_expert, b);
  }
}

}  // namespace

std::vector<ParamSpec> build_param_specs(const ModelConfig& c) {
  c.validate();
  std::vector<ParamSpec> specs;
  SpecBuilder b(specs);
  const int d = c.d_model, in = c.feature_dim * c.time_reduction;
  const ParamRole shared{};
  b.add("frontend/core/w", {in, d}, shared, InitKind::kXavier, in, d);
  b.add("frontend/core/b", {d}, shared, InitKind::kZeros);
  for (int l = 0; l < c.num_layers; ++l) {
    ff_specs(c, l, ModuleSlot::kFF1, b);
    att_specs(c, l, b);
    conv_specs(c, l, b);
    if (c.macaron_ff) ff_specs(c, l, ModuleSlot::kFF2, b);
    const std::string p = "layer" + std::to_string(l) + "/block/core/";
    ParamRole block{l, ModuleSlot::kFF1, -1, false};
    b.add(p + "ln_g", {d}, block, InitKind::kOnes);
    b.add(p + "ln_b", {d}, block, InitKind::kZeros);
  }
  b.add("head/core/w", {d, c.output_dim}, shared, InitKind::kXavier, d,
        c.output_dim);
  b.add("head/core/b", {c.output_dim}, shared, InitKind::kZeros);
  return specs;
}

DisentangledParamRegistry::DisentangledParamRegistry(
    const ModelConfig& config, const std::vector<ParamSpec>& specs) {
  layers_.assign(config.num_layers, std::vector<ModuleParams>(kNumSlots));
  roles_.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ParamId id = static_cast<ParamId>(i);
    const ParamRole& r = specs[i].role;
    roles_.push_back(r);
    if (r.layer < 0 || !r.in_module) {
      shared_core_.push_back(id);
      continue;
    }
    ModuleParams& m = layers_.at(r.layer).at(static_cast<int>(r.slot));
    m.present = true;
    if (r.group < 0) {
      m.core.push_back(id);
    } else {
      if (static_cast<int>(m.groups.size()) <= r.group) {
        m.groups.resize(r.group + 1);
      }
      m.groups[r.group].push_back(id);
    }
  }
  validate(config);
}

std::vector<ParamId> DisentangledParamRegistry::core_params() const {
  std::vector<ParamId> out;
  for (ParamId i = 0; i < size(); ++i)
    if (!roles_[i].is_augment()) out.push_back(i);
  return out;
}

std::vector<ParamId> DisentangledParamRegistry::augment_params() const {
  std::vector<ParamId> out;
  for (ParamId i = 0; i < size(); ++i)
    if (roles_[i].is_augment()) out.push_back(i);
  return out;
}

std::vector<ParamId> DisentangledParamRegistry::group_params(
    ModuleKind kind, const std::vector<int>& groups) const {
  std::vector<ParamId> out;
  for (const auto& layer : layers_) {
    for (int s = 0; s < kNumSlots; ++s) {
      if (slot_kind(static_cast<ModuleSlot>(s)) != kind) continue;
      const ModuleParams& m = layer[s];
      for (int g : groups) {
        if (g < 0 || g >= static_cast<int>(m.groups.size())) {
          throw std::out_of_range(std::string("augment group ") +
                                  std::to_string(g) + " out of range for " +
                                  module_kind_name(kind));
        }
        out.insert(out.end(), m.groups[g].begin(), m.groups[g].end());
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ParamId> DisentangledParamRegistry::layer_params(
    int first_layer) const {
  std::vector<ParamId> out;
  for (ParamId i = 0; i < size(); ++i) {
    const ParamRole& r = roles_[i];
    if (r.layer >= first_layer) out.push_back(i);
  }
  return out;
}

void DisentangledParamRegistry::validate(const ModelConfig& config) const {
  std::vector<int> seen(roles_.size(), 0);
  for (ParamId id : shared_core_) ++seen.at(id);
  for (int l = 0; l < num_layers(); ++l) {
    for (int s = 0; s < kNumSlots; ++s) {
      const ModuleParams& m = layers_[l][s];
      for (ParamId id : m.core) ++seen.at(id);
      for (const auto& g : m.groups)
        for (ParamId id : g) ++seen.at(id);
      if (!m.present) continue;
      const int want = config.aug_groups(slot_kind(static_cast<ModuleSlot>(s)));
      if (static_cast<int>(m.groups.size()) != want) {
        throw std::logic_error("registry: layer " + std::to_string(l) + " " +
                               slot_name(static_cast<ModuleSlot>(s)) +
                               " has " + std::to_string(m.groups.size()) +
                               " augment groups, config wants " +
                               std::to_string(want));
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      throw std::logic_error("registry: parameter " + std::to_string(i) +
                             " assigned " + std::to_string(seen[i]) +
                             " times");
    }
  }
}

Index augment_group_size(const ModelConfig& config, ModuleKind kind) {
  ModelConfig one = config;
  one.num_layers = 1;
  one.macaron_ff = false;
  Index n = 0;
  for (const ParamSpec& s : build_param_specs(one)) {
    if (s.role.group == 0 && slot_kind(s.role.slot) == kind) {
      n += shape_numel(s.shape);
    }
  }
  return n;
}

Index count_params(const ModelConfig& config, CountMode mode,
                   const AugmentBudget& budget) {
  Index n = 0;
  for (const ParamSpec& s : build_param_specs(config)) {
    const ParamRole& r = s.role;
    bool keep = true;
    if (r.is_augment()) {
      switch (mode) {
        case CountMode::kCoreOnly:
          keep = false;
          break;
        case CountMode::kDeployed:
          keep = r.group < budget.get(slot_kind(r.slot));
          break;
        case CountMode::kFull:
          keep = true;
          break;
      }
    }
    if (keep) n += shape_numel(s.shape);
  }
  return n;
}

}  // namespace disco
