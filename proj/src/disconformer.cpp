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

#include "disco/disconformer.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "disco/ops.h"

namespace disco {

namespace {

std::string module_prefix(int layer, ModuleSlot slot, int group) {
  std::string p = "layer" + std::to_string(layer) + "/" + slot_name(slot) + "/";
  p += group < 0 ? "core" : "aug" + std::to_string(group);
  return p + "/";
}

}  // namespace

template <typename T>
Tensor<T> init_param(const ParamSpec& spec, std::uint64_t seed) {
  switch (spec.init) {
    case InitKind::kZeros:
      return Tensor<T>(spec.shape, T(0));
    case InitKind::kOnes:
      return Tensor<T>(spec.shape, T(1));
    case InitKind::kXavier:
      break;
  }
  Rng rng(derive_seed(seed, {fnv1a(spec.name)}, "init"));
  const double a = std::sqrt(6.0 / (spec.fan_in + spec.fan_out));
  Tensor<T> t(spec.shape);
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(-a, a));
  return t;
}

template <typename T>
DisConformer<T>::DisConformer(const ModelConfig& config, std::uint64_t seed)
    : config_(config),
      specs_(build_param_specs(config)),
      registry_(config, specs_) {
  for (const ParamSpec& s : specs_) store_.add(s.name, init_param<T>(s, seed));
}

template <typename T>
void DisConformer<T>::init(std::uint64_t seed) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    store_[static_cast<ParamId>(i)].value = init_param<T>(specs_[i], seed);
  }
}

template <typename T>
void DisConformer<T>::reinit_augment(ModuleKind kind,
                                     const std::vector<int>& groups,
                                     std::uint64_t seed) {
  for (ParamId id : registry_.group_params(kind, groups)) {
    store_[id].value = init_param<T>(specs_[id], seed);
  }
}

template <typename T>
Var<T> DisConformer<T>::bind(Tape<T>& tape, ParamId id,
                             const ForwardOptions& options) const {
  const bool trainable =
      !options.no_grad &&
      (options.trainable == nullptr || options.trainable->at(id));
  return tape.parameter(store_, id, trainable);
}

template <typename T>
Var<T> DisConformer<T>::bind(Tape<T>& tape, const std::string& name,
                             const ForwardOptions& options) const {
  return bind(tape, store_.id(name), options);
}

template <typename T>
std::vector<int> DisConformer<T>::checked(const std::vector<int>& active,
                                          ModuleKind kind) const {
  const int n_a = config_.aug_groups(kind);
  std::vector<int> sorted = active;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= n_a) {
      throw std::out_of_range(std::string(module_kind_name(kind)) +
                              " augment index " + std::to_string(sorted[i]) +
                              " out of range [0, " + std::to_string(n_a) +
                              ")");
    }
    if (i > 0 && sorted[i] == sorted[i - 1]) {
      throw std::invalid_argument(std::string(module_kind_name(kind)) +
                                  " augment index " +
                                  std::to_string(sorted[i]) + " repeated");
    }
  }
  return sorted;
}

template <typename T>
Var<T> DisConformer<T>::drop(const Var<T>& x,
                             const ForwardOptions& options) const {
  if (!options.training || config_.dropout == 0.0) return x;
  if (options.rng == nullptr) {
    throw std::invalid_argument("training forward with dropout needs an rng");
  }
  return dropout(x, config_.dropout, *options.rng, true);
}

template <typename T>
Var<T> DisConformer<T>::ff_forward(Tape<T>& tape, const Var<T>& x, int layer,
                                   ModuleSlot slot,
                                   const std::vector<int>& active,
                                   const ForwardOptions& options) const {
  const std::vector<int> idx = checked(active, ModuleKind::kFeedForward);
  const std::string cp = module_prefix(layer, slot, -1);
  auto expert = [&](const std::string& p) {
    Var<T> h = matmul(x, bind(tape, p + "w1", options));
    h = swish(add_bias(h, bind(tape, p + "b1", options)));
    return matmul(h, bind(tape, p + "w2", options));
  };
  Var<T> y = expert(cp);
  for (int i : idx) y = add(y, expert(module_prefix(layer, slot, i)));
  return add_bias(y, bind(tape, cp + "b2", options));
}

template <typename T>
Var<T> DisConformer<T>::att_forward(Tape<T>& tape, const Var<T>& x, int layer,
                                    const std::vector<int>& active,
                                    const ForwardOptions& options) const {
  const std::vector<int> idx = checked(active, ModuleKind::kAttention);
  const ModuleSlot slot = ModuleSlot::kAtt;
  const Index len = x.value().rows();
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(config_.head_dim()));
  auto head = [&](const std::string& p) {
    const Var<T> q = matmul(x, bind(tape, p + "wq", options));
    const Var<T> k = matmul(x, bind(tape, p + "wk", options));
    const Var<T> v = matmul(x, bind(tape, p + "wv", options));
    Var<T> scores = scale(matmul_bt(q, k), inv_sqrt);
    if (config_.rel_pos_bias) {
      scores = add(scores, rel_position_bias(bind(tape, p + "rel", options),
                                             len, config_.rel_pos_max_distance));
    }
    const Var<T> weights = softmax(scores);
    return matmul(matmul(weights, v), bind(tape, p + "wo", options));
  };
  const std::string cp = module_prefix(layer, slot, -1);
  Var<T> y;
  for (int h = 0; h < config_.att_core_heads; ++h) {
    Var<T> yh = head(cp + "head" + std::to_string(h) + "_");
    y = y.valid() ? add(y, yh) : yh;
  }
  for (int i : idx) y = add(y, head(module_prefix(layer, slot, i)));
  return add_bias(y, bind(tape, cp + "bo", options));
}

template <typename T>
Var<T> DisConformer<T>::conv_forward(Tape<T>& tape, const Var<T>& x, int layer,
                                     const std::vector<int>& active,
                                     const ForwardOptions& options) const {
  const std::vector<int> idx = checked(active, ModuleKind::kConvolution);
  const ModuleSlot slot = ModuleSlot::kConv;
  std::vector<std::string> prefixes{module_prefix(layer, slot, -1)};
  for (int i : idx) prefixes.push_back(module_prefix(layer, slot, i));
  // Assemble the sliced kernels: core channels first, then active experts in
  // ascending index order.
  auto gather = [&](const char* name, bool by_rows) {
    std::vector<Var<T>> parts;
    for (const auto& p : prefixes) parts.push_back(bind(tape, p + name, options));
    if (parts.size() == 1) return parts[0];
    return by_rows ? concat_rows<T>(parts) : concat_cols<T>(parts);
  };
  const Var<T> value = add_bias(matmul(x, gather("pc1_wv", false)),
                                gather("pc1_bv", false));
  const Var<T> gate = add_bias(matmul(x, gather("pc1_wg", false)),
                               gather("pc1_bg", false));
  Var<T> h = mul(value, sigmoid(gate));
  h = add_bias(depthwise_conv1d(h, gather("dc_w", true)), gather("dc_b", false));
  h = layer_norm(h, gather("norm_g", false), gather("norm_b", false),
                 static_cast<T>(config_.ln_eps));
  h = swish(h);
  const Var<T> y = matmul(h, gather("pc2_w", true));
  return add_bias(y, bind(tape, prefixes[0] + "pc2_b", options));
}

template <typename T>
Var<T> DisConformer<T>::block(Tape<T>& tape, Var<T> x, int layer,
                              const LayerSelection& sel,
                              const ForwardOptions& options) const {
  const T eps = static_cast<T>(config_.ln_eps);
  auto norm = [&](const Var<T>& in, const std::string& p) {
    return layer_norm(in, bind(tape, p + "ln_g", options),
                      bind(tape, p + "ln_b", options), eps);
  };
  auto ff = [&](ModuleSlot slot, T weight) {
    const Var<T> in = norm(x, module_prefix(layer, slot, -1));
    const Var<T> out = drop(ff_forward(tape, in, layer, slot, sel.ff, options),
                            options);
    x = add(x, weight == T(1) ? out : scale(out, weight));
  };
  if (config_.macaron_ff) ff(ModuleSlot::kFF1, T(0.5));
  {
    const Var<T> in = norm(x, module_prefix(layer, ModuleSlot::kAtt, -1));
    x = add(x, drop(att_forward(tape, in, layer, sel.att, options), options));
  }
  {
    const Var<T> in = norm(x, module_prefix(layer, ModuleSlot::kConv, -1));
    x = add(x, drop(conv_forward(tape, in, layer, sel.conv, options), options));
  }
  if (config_.macaron_ff) {
    ff(ModuleSlot::kFF2, T(0.5));
  } else {
    ff(ModuleSlot::kFF1, T(1));
  }
  return norm(x, "layer" + std::to_string(layer) + "/block/core/");
}

template <typename T>
Index DisConformer<T>::output_frames(Index frames) const {
  const Index r = config_.time_reduction;
  return (frames + r - 1) / r;
}

template <typename T>
Var<T> DisConformer<T>::forward(Tape<T>& tape, const Tensor<T>& features,
                                const Selection& selection,
                                const ForwardOptions& options) const {
  if (features.empty() || features.rank() != 2 || features.rows() == 0) {
    throw std::invalid_argument("forward: empty input");
  }
  if (features.cols() != config_.feature_dim) {
    throw DimensionError("forward: expected " +
                         std::to_string(config_.feature_dim) +
                         " features per frame, got " +
                         shape_string(features.shape()));
  }
  const Index frames = features.rows(), r = config_.time_reduction;
  if (frames < r) {
    throw std::invalid_argument("forward: " + std::to_string(frames) +
                                " frames is shorter than the time reduction "
                                "factor " + std::to_string(r));
  }
  if (static_cast<int>(selection.layers.size()) != config_.num_layers) {
    throw std::invalid_argument(
        "forward: selection has " + std::to_string(selection.layers.size()) +
        " layers, model has " + std::to_string(config_.num_layers));
  }
  const Index out = output_frames(frames);
  Var<T> x = tape.constant(features);
  x = reshape(pad_rows(x, out * r), Shape{out, config_.feature_dim * r});
  x = add_bias(matmul(x, bind(tape, "frontend/core/w", options)),
               bind(tape, "frontend/core/b", options));
  x = drop(x, options);
  for (int l = 0; l < config_.num_layers; ++l) {
    x = block(tape, x, l, selection.layers[l], options);
  }
  return add_bias(matmul(x, bind(tape, "head/core/w", options)),
                  bind(tape, "head/core/b", options));
}

template <typename T>
Tensor<T> DisConformer<T>::infer(const Tensor<T>& features,
                                 const Selection& selection) const {
  Tape<T> tape;
  ForwardOptions opts;
  opts.no_grad = true;
  return forward(tape, features, selection, opts).value();
}

template class DisConformer<float>;
template class DisConformer<double>;
template Tensor<float> init_param<float>(const ParamSpec&, std::uint64_t);
template Tensor<double> init_param<double>(const ParamSpec&, std::uint64_t);

}  // namespace disco
