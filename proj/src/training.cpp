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

#include "disco/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "disco/ctc.h"
#include "disco/ops.h"

namespace disco {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ------------------------------------------------------------ optimizer ---

template <typename T>
void adam_step(ParameterStore<T>& params, OptimizerState<T>& state,
               const GradBuffer<T>& grads, const TrainableMask& mask, double lr) {
  const int n = params.size();
  if (static_cast<int>(grads.size()) != n || static_cast<int>(mask.size()) != n) {
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " grads and " +
                         std::to_string(mask.size()) + " mask entries for " +
                         std::to_string(n) + " parameters");
  }
  state.m.resize(n);
  state.v.resize(n);
  ++state.step;
  const double b1 = state.config.beta1, b2 = state.config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (ParamId id = 0; id < n; ++id) {
    if (!mask[id]) continue;
    Tensor<T>& p = params[id].value;
    const Tensor<T>& g = grads[id];
    if (!g.empty() && g.shape() != p.shape()) {
      throw DimensionError("adam_step: gradient shape " + shape_string(g.shape()) +
                           " for parameter " + params[id].name + " of shape " +
                           shape_string(p.shape()));
    }
    Tensor<T>& m = state.m[id];
    Tensor<T>& v = state.v[id];
    if (m.empty()) {
      m = Tensor<T>(p.shape());
      v = Tensor<T>(p.shape());
    }
    for (Index i = 0; i < p.numel(); ++i) {
      const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
      m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * gi);
      v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<T>(p[i] - lr * mhat / (std::sqrt(vhat) + state.config.eps));
    }
  }
}

template void adam_step(ParameterStore<float>&, OptimizerState<float>&,
                        const GradBuffer<float>&, const TrainableMask&, double);
template void adam_step(ParameterStore<double>&, OptimizerState<double>&,
                        const GradBuffer<double>&, const TrainableMask&, double);

OptimizerBlob export_optimizer(const OptimizerState<float>& state,
                               const ParameterStore<float>& params) {
  OptimizerBlob blob;
  blob.step = state.step;
  blob.config = state.config;
  for (std::size_t id = 0; id < state.m.size(); ++id) {
    if (state.m[id].empty()) continue;
    blob.names.push_back(params[static_cast<ParamId>(id)].name);
    blob.m.push_back(state.m[id]);
    blob.v.push_back(state.v[id]);
  }
  return blob;
}

OptimizerState<float> import_optimizer(const OptimizerBlob& blob,
                                       const ParameterStore<float>& params) {
  OptimizerState<float> state;
  state.config = blob.config;
  state.step = blob.step;
  state.m.resize(params.size());
  state.v.resize(params.size());
  for (std::size_t i = 0; i < blob.names.size(); ++i) {
    const ParamId id = params.id(blob.names[i]);
    if (blob.m[i].shape() != params[id].value.shape() ||
        blob.v[i].shape() != params[id].value.shape()) {
      throw CheckpointError("optimizer moment shape mismatch for " + blob.names[i]);
    }
    state.m[id] = blob.m[i];
    state.v[id] = blob.v[i];
  }
  return state;
}

// ------------------------------------------------------------- schedule ---

void ScheduleSpec::validate() const {
  if (total_steps < 1) throw std::invalid_argument("schedule total_steps must be >= 1");
  if (stages.empty()) throw std::invalid_argument("schedule has no stages");
  double sum = 0.0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (s.fraction < 0) throw std::invalid_argument("negative schedule stage fraction");
    sum += s.fraction;
    if (s.kind == StageKind::kConst && s.start != s.end) {
      throw std::invalid_argument("const stage with differing endpoints");
    }
    if (s.kind == StageKind::kWarmupLinear && s.start > s.end) {
      throw std::invalid_argument("warmup stage must not decrease");
    }
    if (s.kind == StageKind::kDecayLinear && s.start < s.end) {
      throw std::invalid_argument("decay stage must not increase");
    }
    if (i > 0 && stages[i - 1].end != s.start) {
      throw std::invalid_argument("schedule is discontinuous at stage " + std::to_string(i));
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("schedule fractions must sum to 1");
}

ScheduleSpec ScheduleSpec::pretrain(std::int64_t total, double floor) {
  return {total,
          {{StageKind::kWarmupLinear, 0.08, 0.0, 1.0},
           {StageKind::kConst, 0.32, 1.0, 1.0},
           {StageKind::kDecayLinear, 0.40, 1.0, floor},
           {StageKind::kConst, 0.20, floor, floor}}};
}

ScheduleSpec ScheduleSpec::continual(std::int64_t total, double floor) {
  return {total,
          {{StageKind::kConst, 0.40, 1.0, 1.0},
           {StageKind::kDecayLinear, 0.40, 1.0, floor},
           {StageKind::kConst, 0.20, floor, floor}}};
}

ScheduleSpec ScheduleSpec::named(const std::string& name, std::int64_t total, double floor) {
  if (name == "pretrain") return pretrain(total, floor);
  if (name == "continual") return continual(total, floor);
  throw std::invalid_argument("unknown schedule '" + name + "' (pretrain|continual)");
}

double lr_at(const ScheduleSpec& schedule, std::int64_t step, double peak_lr) {
  schedule.validate();
  if (step < 0 || step > schedule.total_steps) {
    throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(schedule.total_steps) + "]");
  }
  const double total = static_cast<double>(schedule.total_steps);
  const double s = static_cast<double>(step);
  double begin = 0.0;
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    const auto& st = schedule.stages[i];
    const double end = (i + 1 == schedule.stages.size()) ? total : begin + st.fraction * total;
    if (s < end || i + 1 == schedule.stages.size()) {
      if (end <= begin) return peak_lr * st.end;
      const double t = std::clamp((s - begin) / (end - begin), 0.0, 1.0);
      return peak_lr * (st.start + (st.end - st.start) * t);
    }
    begin = end;
  }
  return peak_lr * schedule.stages.back().end;
}

// --------------------------------------------------------- spec augment ---

template <typename T>
Tensor<T> spec_augment(const Tensor<T>& x, const SpecAugmentConfig& c, Rng& rng) {
  if (x.rank() != 2) throw DimensionError("spec_augment expects [T x F]");
  if (c.freq_width < 0 || c.time_width < 0 || c.freq_masks < 0 || c.time_masks < 0) {
    throw std::invalid_argument("spec_augment widths and counts must be >= 0");
  }
  Tensor<T> y = x;
  const Index frames = x.dim(0), feats = x.dim(1);
  auto band = [&](int max_width, Index extent) {
    Index w = c.fixed_width ? max_width : static_cast<Index>(rng.uniform_int(max_width + 1));
    w = std::min(w, extent);
    const Index start = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(extent - w + 1)));
    return std::pair{start, start + w};
  };
  for (int i = 0; i < c.freq_masks; ++i) {
    const auto [b, e] = band(c.freq_width, feats);
    for (Index t = 0; t < frames; ++t)
      for (Index f = b; f < e; ++f) y.at(t, f) = T{0};
  }
  for (int i = 0; i < c.time_masks; ++i) {
    const auto [b, e] = band(c.time_width, frames);
    for (Index t = b; t < e; ++t)
      for (Index f = 0; f < feats; ++f) y.at(t, f) = T{0};
  }
  return y;
}

template Tensor<float> spec_augment(const Tensor<float>&, const SpecAugmentConfig&, Rng&);
template Tensor<double> spec_augment(const Tensor<double>&, const SpecAugmentConfig&, Rng&);

// --------------------------------------------------------------- losses ---

template <typename T>
LossTerms<T> netaug_loss(Tape<T>& tape, const DisConformer<T>& model,
                         const Tensor<T>& features, const LabelSequence& target,
                         double alpha, const Selection& draw, const ForwardOptions& options) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("netaug_loss: alpha must be >= 0");
  const Selection core = Selection::core_only(model.config());
  LossTerms<T> out;
  const Var<T> l_core =
      ctc_loss(log_softmax(model.forward(tape, features, core, options)), target);
  out.total = l_core;
  out.terms.emplace_back("ctc_core", static_cast<double>(l_core.value().item()));
  if (alpha != 0.0) {
    const Var<T> l_aug =
        ctc_loss(log_softmax(model.forward(tape, features, draw, options)), target);
    out.total = add(l_core, scale(l_aug, static_cast<T>(alpha)));
    out.terms.emplace_back("ctc_aug", static_cast<double>(l_aug.value().item()));
  }
  return out;
}

template LossTerms<float> netaug_loss(Tape<float>&, const DisConformer<float>&,
                                      const Tensor<float>&, const LabelSequence&, double,
                                      const Selection&, const ForwardOptions&);
template LossTerms<double> netaug_loss(Tape<double>&, const DisConformer<double>&,
                                       const Tensor<double>&, const LabelSequence&, double,
                                       const Selection&, const ForwardOptions&);

// ------------------------------------------------------------- training ---

std::string MetricsRecord::to_json() const {
  json j;
  j["step"] = step;
  j["lr"] = lr;
  j["loss"] = loss;
  for (const auto& [k, v] : terms) j[k] = v;
  if (dev_wer) j["dev_wer"] = *dev_wer;
  return j.dump();
}

namespace {

MetricsRecord parse_record(const std::string& line) {
  const json j = json::parse(line);
  MetricsRecord r;
  for (const auto& [k, v] : j.items()) {
    if (k == "step") r.step = v.get<std::int64_t>();
    else if (k == "lr") r.lr = v.get<double>();
    else if (k == "loss") r.loss = v.get<double>();
    else if (k == "dev_wer") r.dev_wer = v.get<double>();
    else r.terms.emplace_back(k, v.get<double>());
  }
  return r;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::int64_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(epoch)}, "shuffle"));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
  return perm;
}

struct LoopState {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::size_t pos = 0;
  double best_wer = std::numeric_limits<double>::infinity();
  std::int64_t best_step = 0;
};

std::string state_meta(const LoopSpec& spec, const LoopState& s) {
  json j;
  j["seed"] = spec.config.seed;
  j["step"] = s.step;
  j["epoch"] = s.epoch;
  j["pos"] = s.pos;
  if (std::isfinite(s.best_wer)) j["best_dev_wer"] = s.best_wer;
  else j["best_dev_wer"] = nullptr;
  j["best_step"] = s.best_step;
  j["provenance"] = json::parse(spec.provenance);
  return j.dump();
}

}  // namespace

double greedy_wer(const DisConformer<float>& model, const Selection& selection,
                  const std::vector<const Utterance*>& utterances) {
  if (utterances.empty()) throw std::invalid_argument("greedy_wer: empty utterance set");
  const Vocabulary& vocab = Vocabulary::standard();
  std::size_t errors = 0, words = 0;
  for (const Utterance* u : utterances) {
    const Tensor<float> logits = model.infer(u->features, selection);
    const auto hyp = split_words(vocab.decode(ctc_greedy_decode(logits)));
    const auto ref = split_words(u->transcript);
    errors += edit_distance(hyp, ref);
    words += ref.size();
  }
  if (words == 0) throw std::invalid_argument("greedy_wer: no reference words");
  return static_cast<double>(errors) / static_cast<double>(words);
}

LoopResult run_training_loop(DisConformer<float>& model, const LoopSpec& spec) {
  const LoopConfig& cfg = spec.config;
  if (spec.train.empty()) throw std::invalid_argument("training set is empty");
  if (static_cast<int>(spec.mask.size()) != model.params().size()) {
    throw DimensionError("trainable mask does not match the parameter registry");
  }
  if (cfg.batch_size < 1 || cfg.steps < 1 || cfg.eval_every < 1) {
    throw std::invalid_argument("steps, batch_size and eval_every must be >= 1");
  }
  const ScheduleSpec schedule = ScheduleSpec::named(cfg.schedule, cfg.steps, cfg.lr_floor);
  schedule.validate();

  LoopResult result;
  LoopState st;
  OptimizerState<float> opt;
  opt.config = cfg.adam;

  std::optional<fs::path> metrics_path, last_path, best_path;
  if (spec.out_dir) {
    fs::create_directories(*spec.out_dir);
    metrics_path = *spec.out_dir / "metrics.jsonl";
    last_path = *spec.out_dir / "last.ckpt";
    best_path = *spec.out_dir / "best.ckpt";
  }

  if (spec.resume && last_path && fs::exists(*last_path)) {
    const Checkpoint last = load_checkpoint(*last_path);
    load_into(model, last);
    if (last.has_optimizer) opt = import_optimizer(last.optimizer, model.params());
    const json meta = json::parse(last.meta);
    if (meta.at("seed").get<std::uint64_t>() != cfg.seed) {
      throw CheckpointError("resume seed mismatch");
    }
    st.step = meta.at("step").get<std::int64_t>();
    st.epoch = meta.at("epoch").get<std::int64_t>();
    st.pos = meta.at("pos").get<std::size_t>();
    if (!meta.at("best_dev_wer").is_null()) st.best_wer = meta.at("best_dev_wer").get<double>();
    st.best_step = meta.at("best_step").get<std::int64_t>();
    if (fs::exists(*best_path)) result.best = load_checkpoint(*best_path);
    // Keep log lines up to the resumed step; later ones belong to a lost run.
    std::ifstream in(*metrics_path);
    std::string line, kept;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      MetricsRecord r = parse_record(line);
      if (r.step > st.step) break;
      kept += line + '\n';
      result.log.push_back(std::move(r));
    }
    in.close();
    std::ofstream(*metrics_path, std::ios::binary | std::ios::trunc) << kept;
  } else if (metrics_path) {
    std::ofstream(*metrics_path, std::ios::binary | std::ios::trunc);
  }

  auto save_last = [&] {
    Checkpoint c = snapshot(model, st.step, state_meta(spec, st));
    c.has_optimizer = true;
    c.optimizer = export_optimizer(opt, model.params());
    if (last_path) save_checkpoint(c, *last_path);
    return c;
  };

  std::vector<std::size_t> perm = epoch_order(spec.train.size(), cfg.seed, st.epoch);
  auto next_batch = [&] {
    std::vector<const Utterance*> batch;
    Index frames = 0;
    while (static_cast<int>(batch.size()) < cfg.batch_size) {
      if (st.pos == perm.size()) {
        if (!batch.empty()) break;
        ++st.epoch;
        st.pos = 0;
        perm = epoch_order(spec.train.size(), cfg.seed, st.epoch);
      }
      const Utterance* u = spec.train[perm[st.pos]];
      if (!batch.empty() && frames + u->frames > cfg.max_batch_frames) break;
      batch.push_back(u);
      frames += u->frames;
      ++st.pos;
    }
    return batch;
  };

  while (st.step < cfg.steps) {
    if (spec.stop_after >= 0 && st.step >= spec.stop_after) {
      result.last = save_last();
      result.best_step = st.best_step;
      result.best_dev_wer = st.best_wer;
      return result;
    }
    const auto batch = next_batch();
    GradBuffer<float> grads(model.params().size());
    MetricsRecord rec;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const Utterance& u = *batch[j];
      Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(st.step), j}, "example"));
      const Tensor<float> feats =
          cfg.spec_augment ? spec_augment(u.features, cfg.augment, rng) : u.features;
      ForwardOptions fo;
      fo.training = true;
      fo.rng = &rng;
      fo.trainable = &spec.mask;
      Tape<float> tape;
      tape.set_debug(cfg.debug_numerics);
      LossTerms<float> lt = spec.objective(tape, model, u, feats, fo);
      const double value = lt.total.value().item();
      if (!std::isfinite(value)) {
        throw TrainingDivergedError("non-finite loss " + std::to_string(value) + " at step " +
                                    std::to_string(st.step + 1) + " on utterance " + u.id);
      }
      rec.loss += value * inv_b;
      if (rec.terms.empty()) {
        for (const auto& [k, v] : lt.terms) rec.terms.emplace_back(k, 0.0);
      }
      for (std::size_t t = 0; t < lt.terms.size() && t < rec.terms.size(); ++t) {
        rec.terms[t].second += lt.terms[t].second * inv_b;
      }
      tape.backward(scale(lt.total, static_cast<float>(inv_b)));
      tape.accumulate_param_grads(grads);
    }
    const double lr = lr_at(schedule, st.step + 1, cfg.peak_lr);
    adam_step(model.params(), opt, grads, spec.mask, lr);
    ++st.step;
    rec.step = st.step;
    rec.lr = lr;

    const bool eval_now = st.step % cfg.eval_every == 0 || st.step == cfg.steps;
    if (eval_now && !spec.dev.empty()) {
      const double w = greedy_wer(model, spec.eval_selection, spec.dev);
      rec.dev_wer = w;
      if (w < st.best_wer) {
        st.best_wer = w;
        st.best_step = st.step;
        result.best = snapshot(model, st.step, state_meta(spec, st));
        if (best_path) save_checkpoint(result.best, *best_path);
      }
    }
    if (metrics_path) {
      std::ofstream(*metrics_path, std::ios::binary | std::ios::app) << rec.to_json() << '\n';
    }
    result.log.push_back(std::move(rec));
    if (eval_now && last_path && st.step < cfg.steps) save_last();
  }

  result.last = save_last();
  if (spec.dev.empty()) {
    result.best = snapshot(model, st.step, state_meta(spec, st));
    st.best_step = st.step;
    if (best_path) save_checkpoint(result.best, *best_path);
  }
  result.best_step = st.best_step;
  result.best_dev_wer = st.best_wer;
  result.completed = true;
  return result;
}

LoopResult train(DisConformer<float>& model, const Corpus& corpus, const TrainConfig& config,
                 std::optional<fs::path> out_dir, bool resume, std::int64_t stop_after,
                 const std::string& provenance) {
  LoopSpec spec;
  spec.config = config.loop;
  spec.train = corpus.with_tag(kOrigTrain);
  spec.dev = corpus.with_tag(kOrigDev);
  spec.eval_selection = Selection::core_only(model.config());
  spec.mask.assign(model.params().size(), true);
  spec.out_dir = std::move(out_dir);
  spec.resume = resume;
  spec.stop_after = stop_after;
  spec.provenance = provenance;
  const bool netaug = model.config().has_augment();
  const double alpha = netaug ? config.alpha : 0.0;
  const SelectorOptions selector = config.selector;
  spec.objective = [alpha, selector, netaug](Tape<float>& tape, const DisConformer<float>& m,
                                             const Utterance& u, const Tensor<float>& feats,
                                             const ForwardOptions& fo) {
    const LabelSequence target = Vocabulary::standard().encode(u.transcript);
    // The draw is made even when alpha == 0 so the example rng stream does
    // not depend on alpha.
    const Selection draw = netaug ? sample_selection(m.config(), *fo.rng, selector)
                                  : Selection::core_only(m.config());
    return netaug_loss(tape, m, feats, target, alpha, draw, fo);
  };
  return run_training_loop(model, spec);
}

}  // namespace disco
