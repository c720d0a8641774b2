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

#include <algorithm>
#include <cmath>
#include <map>

#include "disco/evalbench.h"
#include "disco/registry.h"
#include "fixtures.h"
#include "test_util.h"

namespace disco {
namespace {

using testing::pretrained;
using testing::short_cl_loop;

// Emitters.

/// Log-probs whose best path spells `text`: each label on its own frame,
/// separated by blanks.
Tensor<float> spell(const std::string& text) {
  const int V = Vocabulary::standard().size();
  const LabelSequence ls = Vocabulary::standard().encode(text);
  const Index T = 2 * static_cast<Index>(ls.size()) + 1;
  Tensor<float> lp(Shape{T, V});
  for (Index t = 0; t < T; ++t) {
    const int best = t % 2 == 0 ? Vocabulary::kBlank : ls[t / 2];
    for (int v = 0; v < V; ++v) lp.at(t, v) = v == best ? -0.01f : -8.0f;
  }
  return lp;
}

Utterance utt(const std::string& id, const std::string& text) {
  Utterance u;
  u.id = id;
  u.transcript = text;
  return u;
}

TEST(Evaluate, OracleEmitterHasZeroWer) {
  const Utterance a = utt("a", "the cat sat"), b = utt("b", "it's here");
  for (const char* mode : {"greedy", "beam4"}) {
    const EvalResult r = evaluate([](const Utterance& u) { return spell(u.transcript); },
                                  {&a, &b}, DecodeOptions::parse(mode));
    EXPECT_EQ(r.wer, 0.0) << mode;
    EXPECT_EQ(r.words, 5u);
    EXPECT_EQ(r.utterances[1].hypothesis, "it's here");
  }
}

TEST(Evaluate, BlankEmitterDeletesEverything) {
  const Utterance a = utt("a", "one two three");
  const EvalResult r = evaluate([](const Utterance&) { return spell(""); }, {&a});
  EXPECT_EQ(r.wer, 1.0);
  EXPECT_EQ(r.errors, 3u);
  EXPECT_TRUE(std::isinf(r.mean_loss));  // one frame cannot carry the target
}

TEST(Evaluate, SplitWerPoolsEditDistances) {
  const Utterance a = utt("a", "a b c d"), b = utt("b", "a b");
  const std::map<std::string, std::string> hyp{{"a", "a b c x"}, {"b", ""}};
  const EvalResult r =
      evaluate([&](const Utterance& u) { return spell(hyp.at(u.id)); }, {&a, &b});
  EXPECT_DOUBLE_EQ(r.wer, 3.0 / 6.0);  // not (1/4 + 2/2) / 2
  EXPECT_EQ(r.utterances[0].errors, 1u);
  EXPECT_EQ(r.utterances[1].errors, 2u);
}

TEST(Evaluate, EmptySplitRejected) {
  EXPECT_THROW(evaluate([](const Utterance&) { return spell(""); }, {}), std::invalid_argument);
}

TEST(DecodeOptions, Names) {
  EXPECT_EQ(DecodeOptions::parse("greedy").name(), "greedy");
  EXPECT_EQ(DecodeOptions::parse("beam8").beam, 8);
  EXPECT_EQ(DecodeOptions::parse("beam8").name(), "beam8");
  EXPECT_THROW(DecodeOptions::parse("beam0"), std::invalid_argument);
  EXPECT_THROW(DecodeOptions::parse("viterbi"), std::invalid_argument);
}

// Speaker aggregate.

TEST(SpeakerAggregate, MedianConventions) {
  EXPECT_EQ(speaker_aggregate({1, 2, 3}), 2.0);
  EXPECT_EQ(speaker_aggregate({3, 1, 2}), 2.0);
  EXPECT_EQ(speaker_aggregate({1, 2, 3, 4}), 2.5);
  EXPECT_EQ(speaker_aggregate({1, 2, 3, 4}, MedianKind::kLower), 2.0);
  EXPECT_EQ(speaker_aggregate({0.3, 0.3, 0.3, 0.3}), 0.3);
  EXPECT_THROW(speaker_aggregate({}), std::invalid_argument);
}

// Benchmark.

BenchmarkSpec small_spec(std::vector<std::string> speakers, std::vector<std::string> splits) {
  const auto& p = pretrained();
  BenchmarkSpec b;
  b.speakers = std::move(speakers);
  b.splits = std::move(splits);
  b.loop = short_cl_loop(10);
  b.seed = 3;
  b.run_config = p.cfg.to_text();
  return b;
}

ModelEntry disco_entry() {
  const auto& p = pretrained();
  return {"disco", &p.disco, {CLAlgorithm::kDisentangledCL}, p.cfg.cl, ""};
}

TEST(Benchmark, OneSpeakerAggregateIsThatSpeaker) {
  BenchmarkSpec b = small_spec({"spk-02"}, {"train-10min"});
  b.models = {disco_entry()};
  const BenchmarkReport r = run_benchmark(pretrained().corpus, b);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    ASSERT_EQ(row.speakers.size(), 1u);
    EXPECT_EQ(row.wer_lc, row.speakers[0].wer);
    EXPECT_EQ(row.wer_orig, row.speakers[0].wer_orig);
  }
}

TEST(Benchmark, RowsCarryPlanCountsAndRecomputableMedians) {
  const auto& p = pretrained();
  BenchmarkSpec b = small_spec({}, {"train-10min"});
  b.models = {disco_entry(),
              {"base", &p.base, {CLAlgorithm::kFullFT, CLAlgorithm::kKD}, p.cfg.cl, ""}};
  const BenchmarkReport r = run_benchmark(p.corpus, b);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.rows.size(), 5u);
  for (const auto& row : r.rows) {
    ASSERT_EQ(row.speakers.size(), 4u);
    std::vector<double> w, o;
    for (const auto& s : row.speakers) {
      w.push_back(s.wer);
      o.push_back(s.wer_orig);
    }
    EXPECT_EQ(row.wer_lc, speaker_aggregate(w));
    EXPECT_EQ(row.wer_orig, speaker_aggregate(o));
    EXPECT_TRUE(std::is_sorted(row.speakers.begin(), row.speakers.end(),
                               [](auto& a, auto& c) { return a.speaker < c.speaker; }));
    EXPECT_EQ(row.seed, 3u);
    EXPECT_EQ(row.config_digest.size(), 16u);
  }
  const auto* dcl = r.find("disco", "disentangled_cl", "train-10min");
  ASSERT_NE(dcl, nullptr);
  EXPECT_EQ(dcl->cl_params, count_params(p.disco.config, CountMode::kDeployed, p.cfg.cl.k) -
                                count_params(p.disco.config, CountMode::kCoreOnly));
  EXPECT_EQ(r.find("base", "full_ft", "train-10min")->cl_params,
            count_params(p.base.config, CountMode::kFull));
  EXPECT_EQ(r.find("base", "none", "0hr")->cl_params, 0);
  // Zero forgetting: every DisCL speaker model decodes the original domain
  // exactly like the pretrained core.
  const auto* zero = r.find("disco", "none", "0hr");
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(dcl->speakers[i].wer_orig, zero->speakers[i].wer_orig);
    EXPECT_EQ(dcl->speakers[i].loss_orig, zero->speakers[i].loss_orig);
  }
}

TEST(Benchmark, SpeakerOrderAndJobsDoNotChangeTheReport) {
  BenchmarkSpec a = small_spec({"spk-00", "spk-03", "spk-01"}, {"train-10min"});
  a.models = {disco_entry()};
  BenchmarkSpec b = a;
  b.speakers = {"spk-01", "spk-00", "spk-03"};
  b.jobs = 3;
  EXPECT_EQ(run_benchmark(pretrained().corpus, a).to_json(),
            run_benchmark(pretrained().corpus, b).to_json());
}

TEST(Benchmark, FailedSpeakerFailsTheRow) {
  const auto& p = pretrained();
  CLOptions too_many = p.cfg.cl;
  too_many.k.ff = 9;  // the desk model has four augment experts
  BenchmarkSpec b = small_spec({"spk-00"}, {"train-10min"});
  b.models = {{"disco", &p.disco, {CLAlgorithm::kDisentangledCL}, too_many, ""}};
  const BenchmarkReport r = run_benchmark(p.corpus, b);
  EXPECT_FALSE(r.ok());
  const auto* row = r.find("disco", "disentangled_cl", "train-10min");
  ASSERT_NE(row, nullptr);
  EXPECT_TRUE(row->failed);
  EXPECT_NE(row->error.find("spk-00"), std::string::npos);
  EXPECT_FALSE(r.find("disco", "none", "0hr")->failed);
  EXPECT_NE(r.to_json().find("\"failed\": true"), std::string::npos);
}

TEST(Benchmark, UnknownSplitRejected) {
  BenchmarkSpec b = small_spec({}, {"train-100hr"});
  b.models = {disco_entry()};
  EXPECT_THROW(run_benchmark(pretrained().corpus, b), std::invalid_argument);
}

TEST(Benchmark, TableHasTheReportColumns) {
  BenchmarkSpec b = small_spec({"spk-00"}, {"train-10min"});
  b.models = {disco_entry()};
  const std::string t = run_benchmark(pretrained().corpus, b).to_table();
  for (const char* col : {"#CL-Params", "WER_LC", "WER_orig", "0hr", "disentangled_cl"}) {
    EXPECT_NE(t.find(col), std::string::npos) << col;
  }
}

// Ablations.

TEST(Ablation, KdLambdaZeroCellEqualsFullFinetuning) {
  const auto& p = pretrained();
  AblationSpec a;
  a.kind = AblationKind::kKdLambda;
  a.lambdas = {0};
  a.base = &p.base;
  a.cl = p.cfg.cl;
  a.bench = small_spec({"spk-00", "spk-01"}, {"train-10min"});
  const BenchmarkReport r = run_ablations(p.corpus, a);
  ASSERT_TRUE(r.ok());
  const auto* ft = r.find("base", "full_ft", "train-10min");
  const auto* k0 = r.find("base", "kd", "train-10min", "kd_lambda=0");
  ASSERT_TRUE(ft && k0);
  EXPECT_EQ(k0->loss_orig, ft->loss_orig);
  EXPECT_EQ(k0->wer_lc, ft->wer_lc);
  for (std::size_t i = 0; i < ft->speakers.size(); ++i) {
    EXPECT_EQ(k0->speakers[i].checkpoint_digest, ft->speakers[i].checkpoint_digest);
  }
}

double kd_loss_orig(const BenchmarkReport& r, const std::string& split, double lambda) {
  char tag[32];
  std::snprintf(tag, sizeof tag, "kd_lambda=%g", lambda);
  const auto* row = r.find("base", "kd", split, tag);
  return row ? row->loss_orig : std::nan("");
}

// Fixed-seed sweep on a fully pretrained desk Base-FF over the 10hr split,
// medians over every speaker, desk finetuning steps.
TEST(Ablation, KdLambdaGridImprovesOriginalLoss) {
  const auto& p = pretrained();
  const RunConfig cfg = run_preset("desk-base-ff");
  AblationSpec a;
  a.kind = AblationKind::kKdLambda;
  a.lambdas = cfg.kd_lambda_grid;
  a.base = &testing::trained_base();
  a.cl = cfg.cl;
  a.bench.loop = cfg.cl_loop;
  a.bench.steps = cfg.cl_split_steps;
  a.bench.seed = 1;
  a.bench.splits = {"train-10hr"};
  const BenchmarkReport r = run_ablations(p.corpus, a);
  ASSERT_TRUE(r.ok());
  const std::string split = "train-10hr";
  std::string trace;
  for (double lambda : a.lambdas) trace += " " + std::to_string(kd_loss_orig(r, split, lambda));
  EXPECT_EQ(kd_loss_orig(r, split, 0), r.find("base", "full_ft", split)->loss_orig);
  for (std::size_t i = 1; i < a.lambdas.size(); ++i) {
    EXPECT_LE(kd_loss_orig(r, split, a.lambdas[i]), kd_loss_orig(r, split, a.lambdas[i - 1]))
        << "lambda " << a.lambdas[i] << ", trace" << trace;
  }
  EXPECT_LT(kd_loss_orig(r, split, a.lambdas.back()), kd_loss_orig(r, split, 0)) << trace;
}

TEST(Ablation, RecombinationIdentityEqualsPlainRun) {
  const auto& p = pretrained();
  ModelConfig wide = p.disco.config;
  wide.ff_core_experts += wide.ff_aug_experts;
  wide.ff_aug_experts = 0;
  const Checkpoint wide_ck =
      testing::quick_pretrain(wide, p.corpus, p.cfg.train, 20);
  AblationSpec a;
  a.kind = AblationKind::kRecombination;
  a.base = &p.base;
  a.wide_base = &wide_ck;
  a.disco = &p.disco;
  a.cl = p.cfg.cl;
  a.bench = small_spec({"spk-00"}, {"train-10min"});
  const BenchmarkReport r = run_ablations(p.corpus, a);
  ASSERT_TRUE(r.ok()) << r.to_json();
  ASSERT_EQ(r.rows.size(), 4u);
  BenchmarkSpec plain = a.bench;
  plain.zero_hour_rows = false;
  plain.models = {disco_entry()};
  const BenchmarkReport q = run_benchmark(p.corpus, plain);
  const auto* id = r.find("disco+disco", "disentangled_cl", "train-10min");
  const auto* ref = q.find("disco", "disentangled_cl", "train-10min");
  ASSERT_TRUE(id && ref);
  EXPECT_EQ(id->wer_lc, ref->wer_lc);
  EXPECT_EQ(id->wer_orig, ref->wer_orig);
  EXPECT_EQ(id->speakers[0].checkpoint_digest, ref->speakers[0].checkpoint_digest);
  // Core-from-DisCo cells keep the DisCo core, so original-domain WER matches.
  EXPECT_EQ(r.find("disco-core+random", "disentangled_cl", "train-10min")->wer_orig,
            ref->wer_orig);
}

}  // namespace
}  // namespace disco
