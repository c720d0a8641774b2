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

#include "disco/continual.h"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "disco/ctc.h"
#include "disco/ops.h"

namespace disco {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::pair<CLAlgorithm, const char*> kAlgorithmNames[] = {
    {CLAlgorithm::kDisentangledCL, "disentangled_cl"},
    {CLAlgorithm::kFullFT, "full_ft"},
    {CLAlgorithm::kKD, "kd"},
    {CLAlgorithm::kFullFTEfficient, "full_ft_efficient"},
    {CLAlgorithm::kKDEfficient, "kd_efficient"},
};

constexpr ModuleKind kKinds[] = {ModuleKind::kFeedForward, ModuleKind::kAttention,
                                 ModuleKind::kConvolution};

}  // namespace

const char* cl_algorithm_name(CLAlgorithm a) {
  for (const auto& [alg, name] : kAlgorithmNames) {
    if (alg == a) return name;
  }
  return "?";
}

CLAlgorithm parse_cl_algorithm(const std::string& name) {
  for (const auto& [alg, n] : kAlgorithmNames) {
    if (name == n) return alg;
  }
  throw std::invalid_argument("unknown CL algorithm '" + name +
                              "' (disentangled_cl|full_ft|kd|full_ft_efficient|kd_efficient)");
}

bool is_kd(CLAlgorithm a) { return a == CLAlgorithm::kKD || a == CLAlgorithm::kKDEfficient; }

bool is_efficient(CLAlgorithm a) {
  return a == CLAlgorithm::kFullFTEfficient || a == CLAlgorithm::kKDEfficient;
}

// ------------------------------------------------------------------ plan ---

TrainableMask CLPlan::mask(int n) const {
  TrainableMask m(n, false);
  for (ParamId id : trainable) {
    if (id < 0 || id >= n) throw std::out_of_range("plan parameter id out of range");
    m[id] = true;
  }
  return m;
}

Selection CLPlan::selection(const ModelConfig& config, InferenceDomain domain) const {
  if (domain == InferenceDomain::kSpeaker && algorithm == CLAlgorithm::kDisentangledCL) {
    return Selection::uniform(config, groups);
  }
  return Selection::core_only(config);
}

std::string CLPlan::to_json() const {
  json j;
  j["algorithm"] = cl_algorithm_name(algorithm);
  j["groups"] = {{"ff", groups.ff}, {"att", groups.att}, {"conv", groups.conv}};
  j["kd_lambda"] = kd_lambda;
  j["kd_temperature"] = kd_temperature;
  j["efficient_layers"] = efficient_layers;
  j["config_digest"] = digest_hex(config_digest);
  j["num_params"] = num_params;
  j["trainable"] = trainable;
  return j.dump();
}

CLPlan CLPlan::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    CLPlan p;
    p.algorithm = parse_cl_algorithm(j.at("algorithm").get<std::string>());
    p.groups.ff = j.at("groups").at("ff").get<std::vector<int>>();
    p.groups.att = j.at("groups").at("att").get<std::vector<int>>();
    p.groups.conv = j.at("groups").at("conv").get<std::vector<int>>();
    p.kd_lambda = j.at("kd_lambda").get<double>();
    p.kd_temperature = j.at("kd_temperature").get<double>();
    p.efficient_layers = j.at("efficient_layers").get<int>();
    p.config_digest = std::stoull(j.at("config_digest").get<std::string>(), nullptr, 16);
    p.num_params = j.at("num_params").get<Index>();
    p.trainable = j.at("trainable").get<std::vector<ParamId>>();
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed CL plan: ") + e.what());
  }
}

CLPlan build_cl_plan(const ModelConfig& config, CLAlgorithm algorithm,
                     const CLOptions& options, Rng& rng) {
  const std::vector<ParamSpec> specs = build_param_specs(config);
  const DisentangledParamRegistry registry(config, specs);
  CLPlan plan;
  plan.algorithm = algorithm;
  plan.config_digest = config.digest();
  switch (algorithm) {
    case CLAlgorithm::kDisentangledCL: {
      if (!config.has_augment()) {
        throw std::invalid_argument(
            "disentangled_cl needs a model with augment groups (got a Base model)");
      }
      for (ModuleKind kind : kKinds) {
        const int n_a = config.aug_groups(kind);
        const int k = options.k.get(kind);
        if (n_a == 0 || k == 0) continue;
        if (k < 0 || k > n_a) {
          throw std::invalid_argument(std::string("cl.k_") + module_kind_name(kind) + "=" +
                                      std::to_string(k) + " must be in [1, " +
                                      std::to_string(n_a) + "]");
        }
        // Partial Fisher-Yates over the group indices.
        std::vector<int> idx(n_a);
        for (int i = 0; i < n_a; ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
          std::swap(idx[i], idx[i + static_cast<int>(rng.uniform_int(n_a - i))]);
        }
        std::vector<int> chosen(idx.begin(), idx.begin() + k);
        std::sort(chosen.begin(), chosen.end());
        plan.groups.of(kind) = chosen;
        const auto ids = registry.group_params(kind, chosen);
        plan.trainable.insert(plan.trainable.end(), ids.begin(), ids.end());
      }
      if (plan.trainable.empty()) {
        throw std::invalid_argument("disentangled_cl selected no augment groups");
      }
      break;
    }
    case CLAlgorithm::kFullFT:
    case CLAlgorithm::kKD:
      plan.trainable = registry.core_params();
      break;
    case CLAlgorithm::kFullFTEfficient:
    case CLAlgorithm::kKDEfficient: {
      const int n = options.efficient_layers;
      if (n < 1 || n > config.num_layers) {
        throw std::invalid_argument("cl.efficient_layers must be in [1, " +
                                    std::to_string(config.num_layers) + "]");
      }
      plan.efficient_layers = n;
      for (ParamId id : registry.layer_params(config.num_layers - n)) {
        if (!registry.is_augment(id)) plan.trainable.push_back(id);
      }
      break;
    }
  }
  if (is_kd(algorithm)) {
    if (!(options.kd_temperature > 0.0)) {
      throw std::invalid_argument("cl.kd_temperature must be > 0");
    }
    if (!(options.kd_lambda >= 0.0)) throw std::invalid_argument("cl.kd_lambda must be >= 0");
    plan.kd_lambda = options.kd_lambda;
    plan.kd_temperature = options.kd_temperature;
  }
  std::sort(plan.trainable.begin(), plan.trainable.end());
  plan.trainable.erase(std::unique(plan.trainable.begin(), plan.trainable.end()),
                       plan.trainable.end());
  for (ParamId id : plan.trainable) plan.num_params += shape_numel(specs[id].shape);
  return plan;
}

// -------------------------------------------------------------------- KD ---

template <typename T>
Var<T> kd_divergence(const Var<T>& student, const Tensor<T>& teacher, double temperature) {
  if (student.shape() != teacher.shape() || student.value().rank() != 2) {
    throw DimensionError("kd_divergence: student " + shape_string(student.shape()) +
                         " vs teacher " + shape_string(teacher.shape()));
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("kd temperature must be > 0");
  Tape<T>& tape = student.tape();
  const T inv_t = static_cast<T>(1.0 / temperature);
  const Var<T> lp = log_softmax(scale(student, inv_t));
  Tensor<T> scaled = teacher;
  for (Index i = 0; i < scaled.numel(); ++i) scaled[i] *= inv_t;
  const Var<T> lq = log_softmax(tape.constant(std::move(scaled)));
  const Var<T> lq_c = tape.constant(lq.value());
  return sum(mul(exp(lp), sub(lp, lq_c)));
}

template <typename T>
LossTerms<T> kd_loss(Tape<T>& tape, const DisConformer<T>& student,
                     const DisConformer<T>& teacher, const Tensor<T>& features,
                     const LabelSequence& target, double lambda, double temperature,
                     const Selection& selection, const ForwardOptions& options) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("kd_loss: lambda must be >= 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("kd_loss: temperature must be > 0");
  const Var<T> logits = student.forward(tape, features, selection, options);
  const Var<T> ctc = ctc_loss(log_softmax(logits), target);
  LossTerms<T> out;
  out.total = ctc;
  out.terms.emplace_back("ctc", static_cast<double>(ctc.value().item()));
  if (lambda != 0.0) {
    const Tensor<T> t = teacher.infer(features, Selection::core_only(teacher.config()));
    const Var<T> kl = kd_divergence(logits, t, temperature);
    out.total = add(ctc, scale(kl, static_cast<T>(lambda)));
    out.terms.emplace_back("kl", static_cast<double>(kl.value().item()));
  }
  return out;
}

template Var<float> kd_divergence(const Var<float>&, const Tensor<float>&, double);
template Var<double> kd_divergence(const Var<double>&, const Tensor<double>&, double);
template LossTerms<float> kd_loss(Tape<float>&, const DisConformer<float>&,
                                  const DisConformer<float>&, const Tensor<float>&,
                                  const LabelSequence&, double, double, const Selection&,
                                  const ForwardOptions&);
template LossTerms<double> kd_loss(Tape<double>&, const DisConformer<double>&,
                                   const DisConformer<double>&, const Tensor<double>&,
                                   const LabelSequence&, double, double, const Selection&,
                                   const ForwardOptions&);

// ------------------------------------------------------------ finetuning ---

FinetuneResult run_finetune(const Checkpoint& base, const CLPlan& plan, const Corpus& corpus,
                            const std::string& speaker, const std::string& split,
                            const LoopConfig& loop, std::optional<fs::path> out_dir) {
  if (base.kind != CheckpointKind::kModel) {
    throw CheckpointError("finetuning needs a full model checkpoint");
  }
  if (plan.config_digest != base.config_digest()) {
    throw CheckpointError("plan was built for config " + digest_hex(plan.config_digest) +
                          ", checkpoint has " + digest_hex(base.config_digest()));
  }
  DisConformer<float> model = model_from(base);
  std::optional<DisConformer<float>> teacher;
  if (is_kd(plan.algorithm) && plan.kd_lambda != 0.0) teacher.emplace(model_from(base));

  LoopSpec spec;
  spec.config = loop;
  spec.train = corpus.speaker_train(speaker, split);
  spec.dev = corpus.with_tag(kValid, speaker);
  if (spec.train.empty()) {
    throw std::invalid_argument("speaker " + speaker + " has no utterances in " + split);
  }
  const Selection selection = plan.selection(model.config(), InferenceDomain::kSpeaker);
  spec.eval_selection = selection;
  spec.mask = plan.mask(model.params().size());
  spec.out_dir = std::move(out_dir);
  json prov;
  prov["speaker"] = speaker;
  prov["split"] = split;
  prov["algorithm"] = cl_algorithm_name(plan.algorithm);
  spec.provenance = prov.dump();
  const DisConformer<float>* teacher_ptr = teacher ? &*teacher : nullptr;
  const CLPlan p = plan;
  spec.objective = [selection, p, teacher_ptr](Tape<float>& tape, const DisConformer<float>& m,
                                               const Utterance& u, const Tensor<float>& feats,
                                               const ForwardOptions& fo) {
    const LabelSequence target = Vocabulary::standard().encode(u.transcript);
    if (teacher_ptr) {
      return kd_loss(tape, m, *teacher_ptr, feats, target, p.kd_lambda, p.kd_temperature,
                     selection, fo);
    }
    LossTerms<float> out;
    out.total = ctc_loss(log_softmax(m.forward(tape, feats, selection, fo)), target);
    out.terms.emplace_back("ctc", static_cast<double>(out.total.value().item()));
    return out;
  };

  FinetuneResult result;
  result.loop = run_training_loop(model, spec);
  Checkpoint& d = result.speaker;
  d.kind = CheckpointKind::kSpeakerDelta;
  d.config = base.config;
  d.vocabulary = base.vocabulary;
  d.step = result.loop.best_step;
  d.base_digest = base.content_digest();
  for (ParamId id : plan.trainable) d.params.push_back(result.loop.best.params.at(id));
  json meta;
  meta["plan"] = json::parse(plan.to_json());
  meta["speaker"] = speaker;
  meta["split"] = split;
  meta["seed"] = loop.seed;
  meta["best_step"] = result.loop.best_step;
  if (std::isfinite(result.loop.best_dev_wer)) meta["best_dev_wer"] = result.loop.best_dev_wer;
  d.meta = meta.dump();
  return result;
}

CLPlan plan_of(const Checkpoint& delta) {
  if (delta.kind != CheckpointKind::kSpeakerDelta) {
    throw CheckpointError("not a speaker checkpoint");
  }
  return CLPlan::from_json(json::parse(delta.meta).at("plan").dump());
}

DisConformer<float> apply_delta(const Checkpoint& base, const Checkpoint& delta) {
  if (delta.kind != CheckpointKind::kSpeakerDelta) {
    throw CheckpointError("not a speaker checkpoint");
  }
  if (delta.base_digest != base.content_digest()) {
    throw CheckpointError("speaker checkpoint was trained from a different base (" +
                          digest_hex(delta.base_digest) + " vs " +
                          digest_hex(base.content_digest()) + ")");
  }
  if (delta.config_digest() != base.config_digest()) {
    throw CheckpointError("speaker checkpoint config does not match the base");
  }
  DisConformer<float> model = model_from(base);
  auto& store = model.params();
  for (const auto& a : delta.params) {
    const auto id = store.find(a.name);
    if (!id || store[*id].value.shape() != a.value.shape()) {
      throw CheckpointError("speaker array " + a.name + " does not fit the base model");
    }
    store[*id].value = a.value;
  }
  return model;
}

// --------------------------------------------------------- recombination ---

namespace {

std::string leaf(const std::string& name) { return name.substr(name.rfind('/') + 1); }

int sliced_axis(const std::string& leaf_name) {
  if (leaf_name == "w1" || leaf_name == "pc1_wv" || leaf_name == "pc1_wg") return 1;
  static const char* rows[] = {"b1",     "w2",     "pc1_bv", "pc1_bg", "dc_w",
                               "dc_b",   "norm_g", "norm_b", "pc2_w"};
  for (const char* r : rows) {
    if (leaf_name == r) return 0;
  }
  return -1;
}

Tensor<float> slice_axis(const Tensor<float>& src, int axis, Index offset, Index width,
                         const std::string& name) {
  const Index extent = src.dim(axis);
  if (offset + width > extent) {
    throw std::invalid_argument("incompatible shapes: " + name + " needs [" +
                                std::to_string(offset) + ", " + std::to_string(offset + width) +
                                ") of " + std::to_string(extent));
  }
  if (src.rank() == 1) {
    std::vector<float> v(src.vec().begin() + offset, src.vec().begin() + offset + width);
    return Tensor<float>(Shape{width}, std::move(v));
  }
  const Index rows = src.dim(0), cols = src.dim(1);
  if (axis == 0) {
    Tensor<float> out(Shape{width, cols});
    for (Index r = 0; r < width; ++r)
      for (Index c = 0; c < cols; ++c) out.at(r, c) = src.at(offset + r, c);
    return out;
  }
  Tensor<float> out(Shape{rows, width});
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < width; ++c) out.at(r, c) = src.at(r, offset + c);
  return out;
}

Tensor<float> take(const Checkpoint& src, const ParamSpec& spec, const ModelConfig& target) {
  if (src.config == target) {
    const NamedArray* a = src.find(spec.name);
    if (!a || a->value.shape() != spec.shape) {
      throw std::invalid_argument("incompatible shapes: " + spec.name);
    }
    return a->value;
  }
  const ParamRole& r = spec.role;
  std::string src_name = spec.name;
  Index offset = 0;
  if (r.is_augment()) {
    const std::string base = "layer" + std::to_string(r.layer) + "/" + slot_name(r.slot) + "/core/";
    switch (slot_kind(r.slot)) {
      case ModuleKind::kFeedForward:
        src_name = base + leaf(spec.name);
        offset = static_cast<Index>(target.ff_core_experts + r.group) * target.ff_expert_dim;
        break;
      case ModuleKind::kAttention:
        src_name = base + "head" + std::to_string(target.att_core_heads + r.group) + "_" +
                   leaf(spec.name);
        break;
      case ModuleKind::kConvolution:
        src_name = base + leaf(spec.name);
        offset = static_cast<Index>(target.conv_core_experts + r.group) *
                 target.conv_channels_per_expert;
        break;
    }
  }
  const NamedArray* a = src.find(src_name);
  if (!a) throw std::invalid_argument("incompatible shapes: source has no " + src_name);
  if (a->value.shape() == spec.shape && offset == 0) return a->value;
  const int axis = sliced_axis(leaf(spec.name));
  if (axis < 0 || a->value.rank() != static_cast<Index>(spec.shape.size()) ||
      (a->value.rank() == 2 && a->value.dim(1 - axis) != spec.shape[1 - axis])) {
    throw std::invalid_argument("incompatible shapes: " + src_name + " " +
                                shape_string(a->value.shape()) + " for " + spec.name + " " +
                                shape_string(spec.shape));
  }
  return slice_axis(a->value, axis, offset, spec.shape[axis], src_name);
}

}  // namespace

DisConformer<float> recombine(const ParamSource& core, const ParamSource& augment,
                              const ModelConfig& config) {
  DisConformer<float> model(config, core.seed);
  auto& store = model.params();
  for (std::size_t i = 0; i < model.specs().size(); ++i) {
    const ParamSpec& spec = model.specs()[i];
    const ParamSource& src = spec.role.is_augment() ? augment : core;
    Tensor<float>& dst = store[static_cast<ParamId>(i)].value;
    if (src.checkpoint) {
      dst = take(*src.checkpoint, spec, config);
    } else {
      dst = init_param<float>(spec, src.seed);
    }
  }
  return model;
}

}  // namespace disco
