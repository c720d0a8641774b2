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

// Briefly pretrained desk-scale models shared by the slower tests. Built
// once per process on first use.

#include <fstream>
#include <sstream>
#include <string>

#include "disco/checkpoint.h"
#include "disco/corpus.h"
#include "disco/run_config.h"
#include "disco/training.h"

namespace disco::testing {

struct Pretrained {
  RunConfig cfg;
  Corpus corpus;
  Checkpoint disco;
  Checkpoint base;
};

inline constexpr std::uint64_t kCorpusSeed = 11;

inline Checkpoint quick_pretrain(const ModelConfig& model, const Corpus& corpus,
                                 const TrainConfig& base, std::int64_t steps) {
  TrainConfig tc = base;
  tc.loop.steps = steps;
  tc.loop.eval_every = 50;
  tc.loop.seed = 5;
  DisConformer<float> m(model, 5);
  return train(m, corpus, tc).best;
}

inline const Pretrained& pretrained() {
  static const Pretrained p = [] {
    Pretrained p;
    p.cfg = run_preset("desk-disco-ff");
    p.corpus = generate_corpus(p.cfg.data, kCorpusSeed);
    // ctest runs each test in its own process; cache the models on disk.
    const auto dir = std::filesystem::temp_directory_path() /
                     ("disco_test_fixture_" + digest_hex(p.cfg.digest() ^ kCorpusSeed));
    auto cached = [&](const char* name, const ModelConfig& model) {
      const auto path = dir / name;
      if (std::filesystem::exists(path)) return load_checkpoint(path);
      Checkpoint c = quick_pretrain(model, p.corpus, p.cfg.train, 150);
      save_checkpoint(c, path);
      return c;
    };
    p.disco = cached("disco.ckpt", p.cfg.model);
    p.base = cached("base.ckpt", run_preset("desk-base-ff").model);
    return p;
  }();
  return p;
}

/// Desk Base-FF pretrained for the full desk schedule; the KD sweep needs a
/// teacher that actually fits the original domain.
inline const Checkpoint& trained_base() {
  static const Checkpoint c = [] {
    const auto& p = pretrained();
    const RunConfig cfg = run_preset("desk-base-ff");
    const auto path = std::filesystem::temp_directory_path() /
                      ("disco_test_fixture_" + digest_hex(cfg.digest() ^ kCorpusSeed)) /
                      "base_trained.ckpt";
    if (std::filesystem::exists(path)) return load_checkpoint(path);
    Checkpoint c = quick_pretrain(cfg.model, p.corpus, cfg.train, cfg.train.loop.steps);
    save_checkpoint(c, path);
    return c;
  }();
  return c;
}

/// A short finetuning loop for benchmark tests.
inline LoopConfig short_cl_loop(std::int64_t steps = 10) {
  LoopConfig l = pretrained().cfg.cl_loop;
  l.steps = steps;
  l.eval_every = 5;
  return l;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace disco::testing
