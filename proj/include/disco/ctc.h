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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "disco/autodiff.h"
#include "disco/tensor.h"
#include "disco/vocabulary.h"

namespace disco {

/// The target cannot be aligned to the available frames (zero probability).
class CtcInfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Frames needed to emit `target`: its length plus one blank between each
/// pair of equal adjacent labels.
Index ctc_min_frames(const LabelSequence& target);

/// Negative log-likelihood of `target` under per-frame log-distributions
/// `log_probs` [T x V], by the log-space forward recursion. Gradients flow
/// into `log_probs`.
template <typename T>
Var<T> ctc_loss(const Var<T>& log_probs, const LabelSequence& target,
                int blank = Vocabulary::kBlank);

/// Value-only variant (no tape).
template <typename T>
double ctc_loss_value(const Tensor<T>& log_probs, const LabelSequence& target,
                      int blank = Vocabulary::kBlank);

/// Best-path decoding: per-frame argmax (lowest index on ties), collapse
/// repeats, drop blanks.
template <typename T>
LabelSequence ctc_greedy_decode(const Tensor<T>& log_probs,
                                int blank = Vocabulary::kBlank);

/// LM-free prefix beam search. beam == 1 is best-path decoding. Among equally
/// probable prefixes the lexicographically smaller label sequence wins.
template <typename T>
LabelSequence ctc_beam_decode(const Tensor<T>& log_probs, int beam,
                              int blank = Vocabulary::kBlank);

std::vector<std::string> split_words(const std::string& text);

/// Word-level Levenshtein distance (unit substitution/insertion/deletion).
std::size_t edit_distance(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref);

/// edit_distance / |ref|. Throws std::invalid_argument on an empty reference.
double wer(const std::vector<std::string>& hyp,
           const std::vector<std::string>& ref);

}  // namespace disco
