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

#include <string>

#include "disco/run_config.h"

namespace disco {
namespace {

std::string error_of(const std::string& text, std::vector<std::string> overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfig, EmptyDocumentGivesThePresetDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c.preset, "disco-ff");
  EXPECT_EQ(c.model.d_model, 256);
  EXPECT_EQ(c.model.num_layers, 16);
  EXPECT_EQ(c.model.ff_core_experts, 8);
  EXPECT_EQ(c.model.ff_aug_experts, 12);
  EXPECT_EQ(c.model.ff_expert_dim, 64);
  EXPECT_EQ(c.train.loop.steps, 200000);
  EXPECT_EQ(c.train.loop.batch_size, 32);
  EXPECT_DOUBLE_EQ(c.train.loop.peak_lr, 4e-4);
  EXPECT_DOUBLE_EQ(c.cl_loop.peak_lr, 1e-4);
  EXPECT_EQ(c.cl.k.ff, 2);
  EXPECT_DOUBLE_EQ(c.cl.kd_lambda, 8.0);
  EXPECT_EQ(c.data.feature_dim, c.model.feature_dim);
}

TEST(RunConfig, OverrideBeatsFileBeatsPreset) {
  const std::string file = "[cl]\nlr = 1e-3\nsteps = 7\n";
  const RunConfig from_file = parse_config(file);
  EXPECT_DOUBLE_EQ(from_file.cl_loop.peak_lr, 1e-3);
  EXPECT_EQ(from_file.cl_loop.steps, 7);
  const RunConfig overridden = parse_config(file, {"cl.lr=1e-4"});
  EXPECT_DOUBLE_EQ(overridden.cl_loop.peak_lr, 1e-4);
  EXPECT_EQ(overridden.cl_loop.steps, 7);
}

TEST(RunConfig, PresetPrecedence) {
  const std::string file = "[model]\npreset = base-att\n";
  EXPECT_EQ(parse_config(file).preset, "base-att");
  EXPECT_EQ(parse_config(file, {}, "desk-disco-ff").preset, "desk-disco-ff");
  EXPECT_EQ(parse_config(file, {"model.preset=base-conv"}, "desk-disco-ff").preset, "base-conv");
  EXPECT_EQ(parse_config(file).model.ff_aug_experts, 0);
}

TEST(RunConfig, UnknownKeyIsRejectedWithItsPath) {
  EXPECT_NE(error_of("[cl]\nlearning_rate = 1\n").find("cl.learning_rate"), std::string::npos);
  EXPECT_NE(error_of("", {"training.nope=1"}).find("training.nope"), std::string::npos);
  EXPECT_NE(error_of("[bogus]\nx = 1\n").find("bogus.x"), std::string::npos);
}

TEST(RunConfig, RootLevelKeyIsRejected) {
  EXPECT_NE(error_of("lr = 1e-3\n").find("outside a section"), std::string::npos);
}

TEST(RunConfig, TypeErrorNamesTheKey) {
  const std::string e = error_of("[training]\nsteps = many\n");
  EXPECT_NE(e.find("training.steps"), std::string::npos) << e;
  EXPECT_NE(error_of("", {"model.rel_pos_bias=maybe"}).find("model.rel_pos_bias"),
            std::string::npos);
}

TEST(RunConfig, MalformedOverride) {
  EXPECT_FALSE(error_of("", {"cl.lr"}).empty());
  EXPECT_FALSE(error_of("", {"lr=1"}).empty());
}

TEST(RunConfig, AugmentBudgetBeyondTheModelIsRejected) {
  const std::string e = error_of("[cl]\nk_ffn = 13\n", {"model.preset=disco-ff"});
  EXPECT_NE(e.find("cl.k_ffn=13"), std::string::npos) << e;
  EXPECT_EQ(error_of("[cl]\nk_ffn = 12\n", {"model.preset=disco-ff"}), "");
}

TEST(RunConfig, InvalidValuesAreRejected) {
  EXPECT_FALSE(error_of("", {"training.lr=-1"}).empty());
  EXPECT_FALSE(error_of("", {"cl.kd_temperature=0"}).empty());
  EXPECT_FALSE(error_of("", {"model.d_model=0"}).empty());
}

TEST(RunConfig, TextRoundTripIsExact) {
  for (const auto& name : run_preset_names()) {
    const RunConfig a = parse_config("", {"cl.lr=1.2345678901234567e-4", "training.alpha=0.3"}, name);
    const RunConfig b = parse_config(a.to_text());
    EXPECT_EQ(a.to_text(), b.to_text()) << name;
    EXPECT_EQ(a.digest(), b.digest()) << name;
    EXPECT_DOUBLE_EQ(b.cl_loop.peak_lr, 1.2345678901234567e-4);
  }
}

TEST(RunConfig, DigestTracksEveryField) {
  const RunConfig a = parse_config("");
  EXPECT_NE(a.digest(), parse_config("", {"cl.kd_lambda=4"}).digest());
  EXPECT_NE(a.digest(), parse_config("", {"data.noise=0.5"}).digest());
  EXPECT_EQ(a.digest(), parse_config("").digest());
}

TEST(RunConfig, AlgorithmsFollowTheModel) {
  const RunConfig disco = run_preset("disco-ff");
  const RunConfig base = run_preset("base-ff");
  EXPECT_EQ(disco.algorithms_for(disco.model),
            std::vector<CLAlgorithm>{CLAlgorithm::kDisentangledCL});
  EXPECT_EQ(base.algorithms_for(base.model).size(), 4u);
}

TEST(RunConfig, UnknownPresetIsAConfigError) {
  EXPECT_THROW(run_preset("disco-huge"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/disco.ini"), ConfigError);
}

}  // namespace
}  // namespace disco
