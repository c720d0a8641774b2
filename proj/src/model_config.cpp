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

#include "disco/model_config.h"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "disco/random.h"

namespace disco {

const char* module_kind_name(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::kFeedForward:
      return "ff";
    case ModuleKind::kAttention:
      return "att";
    case ModuleKind::kConvolution:
      return "conv";
  }
  return "?";
}

int ModelConfig::head_dim() const {
  if (att_head_dim > 0) return att_head_dim;
  const int h = total_heads();
  return h > 0 ? d_model / h : 0;
}

int ModelConfig::aug_groups(ModuleKind kind) const {
  switch (kind) {
    case ModuleKind::kFeedForward:
      return ff_aug_experts;
    case ModuleKind::kAttention:
      return att_aug_heads;
    case ModuleKind::kConvolution:
      return conv_aug_experts;
  }
  return 0;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("model." + key + ": " + why);
  };
  if (d_model <= 0) fail("d_model", "must be positive");
  if (num_layers < 0) fail("num_layers", "must be >= 0");
  if (output_dim < 2) fail("output_dim", "must be >= 2");
  if (feature_dim <= 0) fail("feature_dim", "must be positive");
  if (time_reduction <= 0) fail("time_reduction", "must be positive");
  if (ff_expert_dim <= 0) fail("ff_expert_dim", "must be positive");
  if (ff_core_experts <= 0) fail("ff_core_experts", "must be positive");
  if (ff_aug_experts < 0) fail("ff_aug_experts", "must be >= 0");
  if (att_core_heads <= 0) fail("att_core_heads", "must be positive");
  if (att_aug_heads < 0) fail("att_aug_heads", "must be >= 0");
  if (att_head_dim < 0) fail("att_head_dim", "must be >= 0");
  if (att_head_dim == 0 && d_model % total_heads() != 0) {
    fail("att_core_heads",
         "d_model " + std::to_string(d_model) + " not divisible by " +
             std::to_string(total_heads()) + " heads");
  }
  if (rel_pos_max_distance < 0) fail("rel_pos_max_distance", "must be >= 0");
  if (conv_channels_per_expert <= 0)
    fail("conv_channels_per_expert", "must be positive");
  if (conv_core_experts <= 0) fail("conv_core_experts", "must be positive");
  if (conv_aug_experts < 0) fail("conv_aug_experts", "must be >= 0");
  if (conv_kernel <= 0 || conv_kernel % 2 == 0)
    fail("conv_kernel", "must be a positive odd number");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout", "must be in [0, 1)");
  if (!(ln_eps > 0.0)) fail("ln_eps", "must be positive");
  if (!glu_pointwise) fail("glu_pointwise", "only the GLU variant is supported");
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream os;
  char buf[64];
  auto dbl = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "d_model=" << d_model << '\n'
     << "num_layers=" << num_layers << '\n'
     << "output_dim=" << output_dim << '\n'
     << "feature_dim=" << feature_dim << '\n'
     << "time_reduction=" << time_reduction << '\n'
     << "ff_expert_dim=" << ff_expert_dim << '\n'
     << "ff_core_experts=" << ff_core_experts << '\n'
     << "ff_aug_experts=" << ff_aug_experts << '\n'
     << "att_core_heads=" << att_core_heads << '\n'
     << "att_aug_heads=" << att_aug_heads << '\n'
     << "att_head_dim=" << att_head_dim << '\n'
     << "rel_pos_bias=" << (rel_pos_bias ? 1 : 0) << '\n'
     << "rel_pos_max_distance=" << rel_pos_max_distance << '\n'
     << "conv_channels_per_expert=" << conv_channels_per_expert << '\n'
     << "conv_core_experts=" << conv_core_experts << '\n'
     << "conv_aug_experts=" << conv_aug_experts << '\n'
     << "conv_kernel=" << conv_kernel << '\n'
     << "dropout=" << dbl(dropout) << '\n'
     << "ln_eps=" << dbl(ln_eps) << '\n'
     << "macaron_ff=" << (macaron_ff ? 1 : 0) << '\n'
     << "glu_pointwise=" << (glu_pointwise ? 1 : 0) << '\n';
  return os.str();
}

std::uint64_t ModelConfig::digest() const { return fnv1a(canonical_text()); }

ModelConfig ModelConfig::parse_canonical(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("malformed model config line: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig c;
  auto take = [&kv](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::invalid_argument(std::string("model config missing ") + key);
    }
    return it->second;
  };
  c.d_model = std::stoi(take("d_model"));
  c.num_layers = std::stoi(take("num_layers"));
  c.output_dim = std::stoi(take("output_dim"));
  c.feature_dim = std::stoi(take("feature_dim"));
  c.time_reduction = std::stoi(take("time_reduction"));
  c.ff_expert_dim = std::stoi(take("ff_expert_dim"));
  c.ff_core_experts = std::stoi(take("ff_core_experts"));
  c.ff_aug_experts = std::stoi(take("ff_aug_experts"));
  c.att_core_heads = std::stoi(take("att_core_heads"));
  c.att_aug_heads = std::stoi(take("att_aug_heads"));
  c.att_head_dim = std::stoi(take("att_head_dim"));
  c.rel_pos_bias = std::stoi(take("rel_pos_bias")) != 0;
  c.rel_pos_max_distance = std::stoi(take("rel_pos_max_distance"));
  c.conv_channels_per_expert = std::stoi(take("conv_channels_per_expert"));
  c.conv_core_experts = std::stoi(take("conv_core_experts"));
  c.conv_aug_experts = std::stoi(take("conv_aug_experts"));
  c.conv_kernel = std::stoi(take("conv_kernel"));
  c.dropout = std::stod(take("dropout"));
  c.ln_eps = std::stod(take("ln_eps"));
  c.macaron_ff = std::stoi(take("macaron_ff")) != 0;
  c.glu_pointwise = std::stoi(take("glu_pointwise")) != 0;
  return c;
}

ModelConfig model_preset(const std::string& name) {
  ModelConfig c;  // shared: d=256, 16 layers, V=30, f_a=64, K=31, p=0.1
  if (name == "disco-ff" || name == "base-ff") {
    c.ff_core_experts = 8;
    c.ff_aug_experts = name == "disco-ff" ? 12 : 0;
    c.att_core_heads = 4;
    c.conv_channels_per_expert = 16;
    c.conv_core_experts = 16;
  } else if (name == "disco-att" || name == "base-att") {
    c.ff_core_experts = 20;
    c.ff_aug_experts = 0;
    c.att_core_heads = 2;
    c.att_aug_heads = name == "disco-att" ? 2 : 0;
    // Base-Att keeps the 64-wide heads of its disentangled counterpart.
    c.att_head_dim = 64;
    c.conv_channels_per_expert = 16;
    c.conv_core_experts = 16;
  } else if (name == "disco-conv" || name == "base-conv") {
    c.ff_core_experts = 20;
    c.ff_aug_experts = 0;
    c.att_core_heads = 4;
    c.conv_channels_per_expert = 8;
    c.conv_core_experts = 16;
    c.conv_aug_experts = name == "disco-conv" ? 16 : 0;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  c.validate();
  return c;
}

std::vector<std::string> model_preset_names() {
  return {"disco-ff", "disco-att", "disco-conv",
          "base-ff",  "base-att",  "base-conv"};
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace disco
