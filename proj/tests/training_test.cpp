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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "disco/checkpoint.h"
#include "disco/ctc.h"
#include "disco/ops.h"
#include "disco/training.h"
#include "fixtures.h"
#include "oracles.h"
#include "test_util.h"

namespace disco {
namespace {

using testing::scratch_dir;
using testing::slurp;

// Optimizer.

ParameterStore<double> scalar_store(std::vector<double> values) {
  ParameterStore<double> s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s.add("p" + std::to_string(i), Tensor<double>(Shape{1}, {values[i]}));
  }
  return s;
}

TEST(Adam, MatchesClosedFormOverTwoSteps) {
  auto store = scalar_store({1.0});
  OptimizerState<double> st;
  const GradBuffer<double> g{Tensor<double>(Shape{1}, {0.5})};
  const double lr = 0.1, b1 = 0.9, b2 = 0.98, eps = 1e-8;
  double p = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    adam_step(store, st, g, TrainableMask{true}, lr);
    m = b1 * m + (1 - b1) * 0.5;
    v = b2 * v + (1 - b2) * 0.25;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    p -= lr * mh / (std::sqrt(vh) + eps);
    EXPECT_NEAR(store[0].value[0], p, 1e-12) << "step " << t;
  }
  // A constant gradient moves by lr per step once bias-corrected.
  EXPECT_NEAR(store[0].value[0], 0.8, 1e-6);
  EXPECT_EQ(st.step, 2);
}

TEST(Adam, MaskedParametersAreFrozenWithMoments) {
  auto store = scalar_store({1.0, 2.0});
  OptimizerState<double> st;
  const GradBuffer<double> g{Tensor<double>(Shape{1}, {1.0}), Tensor<double>(Shape{1}, {1.0})};
  for (int i = 0; i < 3; ++i) adam_step(store, st, g, TrainableMask{true, false}, 0.01);
  EXPECT_NE(store[0].value[0], 1.0);
  EXPECT_EQ(store[1].value[0], 2.0);
  ASSERT_EQ(st.m.size(), 2u);
  EXPECT_TRUE(st.m[1].empty() || st.m[1][0] == 0.0);
}

TEST(Adam, EmptyGradientCountsAsZero) {
  auto store = scalar_store({1.0});
  OptimizerState<double> st;
  adam_step(store, st, GradBuffer<double>(1), TrainableMask{true}, 0.1);
  EXPECT_EQ(store[0].value[0], 1.0);
}

TEST(Adam, ShapeMismatchRejected) {
  auto store = scalar_store({1.0});
  OptimizerState<double> st;
  const GradBuffer<double> g{Tensor<double>(Shape{2}, {1.0, 1.0})};
  EXPECT_THROW(adam_step(store, st, g, TrainableMask{true}, 0.1), DimensionError);
  EXPECT_THROW(adam_step(store, st, GradBuffer<double>(2), TrainableMask{true}, 0.1),
               DimensionError);
}

// Schedule.

TEST(Schedule, PretrainShape) {
  const auto s = ScheduleSpec::pretrain(1000, 0.05);
  EXPECT_DOUBLE_EQ(lr_at(s, 0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 40, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(lr_at(s, 80, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 400, 1.0), 1.0);
  EXPECT_NEAR(lr_at(s, 600, 1.0), 0.525, 1e-12);
  EXPECT_NEAR(lr_at(s, 800, 1.0), 0.05, 1e-12);
  EXPECT_NEAR(lr_at(s, 1000, 1.0), 0.05, 1e-12);
  EXPECT_NEAR(lr_at(s, 80, 4e-4), 4e-4, 1e-18);
  EXPECT_THROW(lr_at(s, 1001, 1.0), std::out_of_range);
  EXPECT_THROW(lr_at(s, -1, 1.0), std::out_of_range);
}

TEST(Schedule, ContinualStartsAtPeak) {
  const auto s = ScheduleSpec::continual(100, 0.05);
  EXPECT_DOUBLE_EQ(lr_at(s, 0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 40, 2.0), 2.0);
  EXPECT_NEAR(lr_at(s, 60, 2.0), 1.05, 1e-12);
  EXPECT_NEAR(lr_at(s, 100, 2.0), 0.1, 1e-12);
}

TEST(Schedule, ValidationAndNames) {
  ScheduleSpec bad{100, {{StageKind::kConst, 0.5, 1, 1}}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_NO_THROW(ScheduleSpec::named("pretrain", 10).validate());
  EXPECT_THROW(ScheduleSpec::named("cosine", 10), std::invalid_argument);
}

TEST(Schedule, PiecewiseLinearBetweenKnots) {
  const auto s = ScheduleSpec::pretrain(1000, 0.05);
  for (std::int64_t t = 1; t < 1000; ++t) {
    const double mid = 0.5 * (lr_at(s, t - 1, 1.0) + lr_at(s, t + 1, 1.0));
    if (t == 80 || t == 400 || t == 800) continue;
    EXPECT_NEAR(lr_at(s, t, 1.0), mid, 1e-12) << t;
  }
}

// SpecAugment.

Tensor<float> ones(Index t, Index f) {
  Tensor<float> x(Shape{t, f});
  for (float& v : x.data()) v = 1.0f;
  return x;
}

TEST(SpecAugment, NoMasksIsIdentity) {
  Rng rng(1);
  const auto x = ones(10, 6);
  EXPECT_EQ(spec_augment(x, {0, 27, 0, 100, false}, rng), x);
}

TEST(SpecAugment, FixedFrequencyMaskZeroesContiguousBand) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto y = spec_augment(ones(12, 16), {1, 3, 0, 0, true}, rng);
    std::vector<int> zero_cols;
    for (Index c = 0; c < 16; ++c) {
      bool all0 = true, all1 = true;
      for (Index t = 0; t < 12; ++t) {
        all0 &= y.at(t, c) == 0.0f;
        all1 &= y.at(t, c) == 1.0f;
      }
      ASSERT_TRUE(all0 || all1);
      if (all0) zero_cols.push_back(static_cast<int>(c));
    }
    ASSERT_EQ(zero_cols.size(), 3u);
    EXPECT_EQ(zero_cols.back() - zero_cols.front(), 2);
  }
}

TEST(SpecAugment, TimeMaskClampedToLength) {
  Rng rng(2);
  const auto y = spec_augment(ones(10, 4), {0, 0, 1, 100, true}, rng);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(SpecAugment, WidthsBoundedAndSeeded) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const auto y = spec_augment(ones(30, 8), {0, 0, 1, 5, false}, a);
    EXPECT_EQ(y, spec_augment(ones(30, 8), {0, 0, 1, 5, false}, b));
    int zero_rows = 0;
    for (Index t = 0; t < 30; ++t) zero_rows += y.at(t, 0) == 0.0f;
    EXPECT_LE(zero_rows, 5);
  }
}

// NetAug loss.

class NetAug : public ::testing::Test {
 protected:
  NetAug() : model_(oracle::tiny_config(), 3) {
    oracle::randomize(model_, 4, 0.3);
    Rng rng(9);
    x_ = testing::random_tensor(Shape{10, 3}, rng);
  }
  double ctc_of(const Selection& s, GradBuffer<double>* grads = nullptr) {
    Tape<double> t;
    auto l = ctc_loss(log_softmax(model_.forward(t, x_, s)), target_);
    if (grads) {
      t.backward(l);
      t.accumulate_param_grads(*grads);
    }
    return l.value().item();
  }
  DisConformer<double> model_;
  Tensor<double> x_;
  LabelSequence target_{1, 2, 1};
};

TEST_F(NetAug, AlphaZeroIsCoreOnlyCtc) {
  Tape<double> t;
  const auto lt = netaug_loss(t, model_, x_, target_, 0.0, Selection::full(model_.config()));
  ASSERT_EQ(lt.terms.size(), 1u);
  EXPECT_EQ(lt.terms[0].first, "ctc_core");
  EXPECT_EQ(lt.total.value().item(), ctc_of(Selection::core_only(model_.config())));
}

TEST_F(NetAug, FullSelectionEqualsTwoSeparatePasses) {
  const Selection full = Selection::full(model_.config());
  const double alpha = 0.7;
  Tape<double> t;
  const auto lt = netaug_loss(t, model_, x_, target_, alpha, full);
  t.backward(lt.total);
  GradBuffer<double> joint(model_.params().size());
  t.accumulate_param_grads(joint);

  GradBuffer<double> gc(model_.params().size()), ga(model_.params().size());
  const double lc = ctc_of(Selection::core_only(model_.config()), &gc);
  const double la = ctc_of(full, &ga);
  EXPECT_NEAR(lt.total.value().item(), lc + alpha * la, 1e-10);
  for (ParamId id = 0; id < model_.params().size(); ++id) {
    for (Index k = 0; k < joint[id].numel(); ++k) {
      const double c = gc[id].empty() ? 0.0 : gc[id][k];
      const double a = ga[id].empty() ? 0.0 : ga[id][k];
      EXPECT_NEAR(joint[id][k], c + alpha * a, 1e-10) << model_.params()[id].name;
    }
  }
}

TEST_F(NetAug, UnselectedAugmentGroupsGetZeroGradient) {
  LayerSelection sets;
  sets.ff = {1};
  sets.att = {0};
  sets.conv = {2};
  const Selection draw = Selection::uniform(model_.config(), sets);
  Tape<double> t;
  t.backward(netaug_loss(t, model_, x_, target_, 1.0, draw).total);
  GradBuffer<double> g(model_.params().size());
  t.accumulate_param_grads(g);
  const auto& reg = model_.registry();
  bool selected_nonzero = false;
  for (ParamId id : reg.augment_params()) {
    const auto& role = reg.role(id);
    const auto& chosen = sets.of(slot_kind(role.slot));
    const bool selected =
        std::find(chosen.begin(), chosen.end(), role.group) != chosen.end();
    double norm = 0.0;
    for (Index k = 0; k < g[id].numel(); ++k) norm += std::abs(g[id][k]);
    if (selected) selected_nonzero |= norm > 0.0;
    else EXPECT_EQ(norm, 0.0) << model_.params()[id].name;
  }
  EXPECT_TRUE(selected_nonzero);
}

TEST_F(NetAug, NegativeAlphaRejected) {
  Tape<double> t;
  EXPECT_THROW(netaug_loss(t, model_, x_, target_, -0.1, Selection::full(model_.config())),
               std::invalid_argument);
}

// Checkpoints.

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = scratch_dir("ckpt_roundtrip");
  DisConformer<float> m(oracle::tiny_config(), 7);
  Checkpoint c = snapshot(m, 12, R"({"note":"x"})");
  c.has_optimizer = true;
  c.optimizer.step = 3;
  for (const auto& p : c.params) {
    c.optimizer.names.push_back(p.name);
    c.optimizer.m.push_back(p.value);
    c.optimizer.v.push_back(p.value);
  }
  save_checkpoint(c, dir / "a.ckpt");
  const Checkpoint r = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(r, c);
  save_checkpoint(r, dir / "b.ckpt");
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  DisConformer<float> m2(oracle::tiny_config(), 8);
  load_into(m2, r);
  for (ParamId id = 0; id < m.params().size(); ++id) {
    EXPECT_EQ(m2.params()[id].value, m.params()[id].value);
  }
}

TEST(Checkpoint, CorruptionAndMismatchRejected) {
  const auto dir = scratch_dir("ckpt_corrupt");
  DisConformer<float> m(oracle::tiny_config(), 7);
  save_checkpoint(snapshot(m), dir / "a.ckpt");
  std::string bytes = slurp(dir / "a.ckpt");
  {
    std::ofstream os(dir / "trail.ckpt", std::ios::binary);
    os << bytes << 'x';
  }
  EXPECT_THROW(load_checkpoint(dir / "trail.ckpt"), CheckpointError);
  bytes[0] = 'X';
  {
    std::ofstream os(dir / "magic.ckpt", std::ios::binary);
    os << bytes;
  }
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), CheckpointError);
  {
    std::ofstream os(dir / "short.ckpt", std::ios::binary);
    os << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), CheckpointError);

  ModelConfig other = oracle::tiny_config();
  other.ff_aug_experts = 3;
  DisConformer<float> m3(other, 1);
  EXPECT_THROW(load_into(m3, load_checkpoint(dir / "a.ckpt")), CheckpointError);
}

// Training loop.

TEST(TrainingLoop, LossDecreasesOnToyCorpus) {
  const auto& p = testing::pretrained();
  TrainConfig tc = p.cfg.train;
  tc.loop.steps = 50;
  tc.loop.eval_every = 50;
  tc.loop.seed = 2;
  DisConformer<float> m(p.cfg.model, 2);
  const LoopResult r = train(m, p.corpus, tc);
  ASSERT_EQ(r.log.size(), 50u);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += r.log[i].loss;
    last += r.log[r.log.size() - 1 - i].loss;
  }
  EXPECT_LT(last, 0.6 * first);
  EXPECT_TRUE(r.completed);
  EXPECT_TRUE(r.log.back().dev_wer.has_value());
}

TEST(TrainingLoop, ResumeReplaysTheUninterruptedRun) {
  const auto& p = testing::pretrained();
  TrainConfig tc = p.cfg.train;
  tc.loop.steps = 20;
  tc.loop.eval_every = 7;
  tc.loop.seed = 4;
  const auto a = scratch_dir("resume_a"), b = scratch_dir("resume_b");
  {
    DisConformer<float> m(p.cfg.model, 1);
    train(m, p.corpus, tc, a);
  }
  {
    DisConformer<float> m(p.cfg.model, 1);
    const LoopResult part = train(m, p.corpus, tc, b, false, 10);
    EXPECT_FALSE(part.completed);
    EXPECT_EQ(part.last.step, 10);
  }
  {
    DisConformer<float> fresh(p.cfg.model, 99);  // overwritten by resume
    const LoopResult rest = train(fresh, p.corpus, tc, b, true);
    EXPECT_TRUE(rest.completed);
  }
  EXPECT_EQ(slurp(a / "metrics.jsonl"), slurp(b / "metrics.jsonl"));
  EXPECT_EQ(slurp(a / "last.ckpt"), slurp(b / "last.ckpt"));
  EXPECT_EQ(slurp(a / "best.ckpt"), slurp(b / "best.ckpt"));
}

TEST(TrainingLoop, NonFiniteLossAbortsNamingStep) {
  const auto& p = testing::pretrained();
  DisConformer<float> m(p.cfg.model, 1);
  LoopSpec spec;
  spec.config = p.cfg.train.loop;
  spec.config.steps = 5;
  spec.train = p.corpus.with_tag(kOrigTrain);
  spec.mask.assign(m.params().size(), true);
  spec.eval_selection = Selection::core_only(m.config());
  int calls = 0;
  spec.objective = [&](Tape<float>& t, const DisConformer<float>&, const Utterance&,
                       const Tensor<float>&, const ForwardOptions&) {
    LossTerms<float> lt;
    const float v = ++calls > 10 ? std::numeric_limits<float>::quiet_NaN() : 1.0f;
    lt.total = t.constant(Tensor<float>(Shape{1}, {v}));
    return lt;
  };
  try {
    run_training_loop(m, spec);
    FAIL() << "expected divergence";
  } catch (const TrainingDivergedError& e) {
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos) << e.what();
  }
}

TEST(TrainingLoop, MaskSizeMismatchRejected) {
  const auto& p = testing::pretrained();
  DisConformer<float> m(p.cfg.model, 1);
  LoopSpec spec;
  spec.train = p.corpus.with_tag(kOrigTrain);
  spec.mask.assign(3, true);
  EXPECT_THROW(run_training_loop(m, spec), DimensionError);
}

}  // namespace
}  // namespace disco
