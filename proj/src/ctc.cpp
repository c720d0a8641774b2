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

#include "disco/ctc.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace disco {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  return a > b ? a + std::log1p(std::exp(b - a))
               : b + std::log1p(std::exp(a - b));
}

// Extended label sequence with blanks: [-, l1, -, l2, ..., lL, -].
std::vector<int> extend(const LabelSequence& target, int blank) {
  std::vector<int> ext(2 * target.size() + 1, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

template <typename T>
void check_inputs(const Tensor<T>& lp, const LabelSequence& target,
                  int blank) {
  if (lp.rank() != 2) {
    throw DimensionError("ctc: log_probs must be [T x V], got " +
                         shape_string(lp.shape()));
  }
  const Index vocab = lp.dim(1);
  if (blank < 0 || blank >= vocab) {
    throw std::invalid_argument("ctc: blank index out of range");
  }
  for (int l : target) {
    if (l < 0 || l >= vocab || l == blank) {
      throw std::invalid_argument("ctc: target label " + std::to_string(l) +
                                  " is blank or out of range [0, " +
                                  std::to_string(vocab) + ")");
    }
  }
  const Index need = ctc_min_frames(target);
  if (lp.dim(0) < need) {
    throw CtcInfeasibleError("ctc: target of length " +
                             std::to_string(target.size()) + " needs " +
                             std::to_string(need) + " frames, got " +
                             std::to_string(lp.dim(0)));
  }
}

bool can_skip(const std::vector<int>& ext, std::size_t s, int blank) {
  return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
}

struct Lattice {
  std::vector<double> alpha;  // [T x S]
  std::vector<double> beta;
  double log_likelihood = kLogZero;
};

template <typename T>
Lattice forward_backward(const Tensor<T>& lp, const std::vector<int>& ext,
                         int blank, bool with_beta) {
  const Index frames = lp.dim(0), vocab = lp.dim(1);
  const std::size_t S = ext.size();
  auto emit = [&](Index t, std::size_t s) {
    return static_cast<double>(lp[t * vocab + ext[s]]);
  };
  Lattice lat;
  lat.alpha.assign(frames * S, kLogZero);
  auto A = [&](Index t, std::size_t s) -> double& { return lat.alpha[t * S + s]; };
  A(0, 0) = emit(0, 0);
  if (S > 1) A(0, 1) = emit(0, 1);
  for (Index t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = log_add(acc, A(t - 1, s - 1));
      if (can_skip(ext, s, blank)) acc = log_add(acc, A(t - 1, s - 2));
      if (acc != kLogZero) A(t, s) = acc + emit(t, s);
    }
  }
  lat.log_likelihood = A(frames - 1, S - 1);
  if (S > 1) lat.log_likelihood = log_add(lat.log_likelihood, A(frames - 1, S - 2));
  if (!with_beta) return lat;

  lat.beta.assign(frames * S, kLogZero);
  auto B = [&](Index t, std::size_t s) -> double& { return lat.beta[t * S + s]; };
  B(frames - 1, S - 1) = emit(frames - 1, S - 1);
  if (S > 1) B(frames - 1, S - 2) = emit(frames - 1, S - 2);
  for (Index t = frames - 2; t >= 0; --t) {
    for (std::size_t s = 0; s < S; ++s) {
      double acc = B(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, B(t + 1, s + 1));
      if (s + 2 < S && can_skip(ext, s + 2, blank)) {
        acc = log_add(acc, B(t + 1, s + 2));
      }
      if (acc != kLogZero) B(t, s) = acc + emit(t, s);
    }
  }
  return lat;
}

}  // namespace

Index ctc_min_frames(const LabelSequence& target) {
  Index n = static_cast<Index>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

template <typename T>
double ctc_loss_value(const Tensor<T>& log_probs, const LabelSequence& target,
                      int blank) {
  check_inputs(log_probs, target, blank);
  const Lattice lat =
      forward_backward(log_probs, extend(target, blank), blank, false);
  if (lat.log_likelihood == kLogZero) {
    throw CtcInfeasibleError("ctc: target has zero probability");
  }
  return -lat.log_likelihood;
}

template <typename T>
Var<T> ctc_loss(const Var<T>& log_probs, const LabelSequence& target,
                int blank) {
  const Tensor<T>& lp = log_probs.value();
  check_inputs(lp, target, blank);
  const std::vector<int> ext = extend(target, blank);
  const bool rg = log_probs.requires_grad();
  Lattice lat = forward_backward(lp, ext, blank, rg);
  if (lat.log_likelihood == kLogZero) {
    throw CtcInfeasibleError("ctc: target has zero probability");
  }
  const double logp = lat.log_likelihood;
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(-logp));
  if (!rg) return log_probs.tape().record("ctc_loss", std::move(y), false, {});

  // d(-log P)/d lp[t][k] = -sum_{s: ext[s] = k} exp(alpha + beta - lp - log P)
  const Index frames = lp.dim(0), vocab = lp.dim(1);
  const std::size_t S = ext.size();
  Tensor<T> dlp(lp.shape());
  std::vector<double> acc(vocab);
  for (Index t = 0; t < frames; ++t) {
    std::fill(acc.begin(), acc.end(), kLogZero);
    for (std::size_t s = 0; s < S; ++s) {
      const double ab = lat.alpha[t * S + s] + lat.beta[t * S + s];
      acc[ext[s]] = log_add(acc[ext[s]], ab);
    }
    for (Index k = 0; k < vocab; ++k) {
      if (acc[k] == kLogZero) continue;
      const double lpk = static_cast<double>(lp[t * vocab + k]);
      dlp[t * vocab + k] = static_cast<T>(-std::exp(acc[k] - lpk - logp));
    }
  }
  const Index id = log_probs.id();
  return log_probs.tape().record(
      "ctc_loss", std::move(y), true,
      [id, dlp = std::move(dlp)](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gx = t.grad_of(id);
        const T g0 = g[0];
        for (Index i = 0; i < gx.numel(); ++i) gx[i] += g0 * dlp[i];
      });
}

template <typename T>
LabelSequence ctc_greedy_decode(const Tensor<T>& log_probs, int blank) {
  if (log_probs.rank() != 2) {
    throw DimensionError("ctc_greedy_decode: expected [T x V], got " +
                         shape_string(log_probs.shape()));
  }
  const Index frames = log_probs.dim(0), vocab = log_probs.dim(1);
  LabelSequence out;
  int prev = -1;
  for (Index t = 0; t < frames; ++t) {
    int best = 0;
    for (Index k = 1; k < vocab; ++k) {
      if (log_probs[t * vocab + k] > log_probs[t * vocab + best]) {
        best = static_cast<int>(k);
      }
    }
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

template <typename T>
LabelSequence ctc_beam_decode(const Tensor<T>& log_probs, int beam,
                              int blank) {
  if (beam < 1) throw std::invalid_argument("ctc_beam_decode: beam must be >= 1");
  if (beam == 1) return ctc_greedy_decode(log_probs, blank);
  if (log_probs.rank() != 2) {
    throw DimensionError("ctc_beam_decode: expected [T x V], got " +
                         shape_string(log_probs.shape()));
  }
  const Index frames = log_probs.dim(0), vocab = log_probs.dim(1);
  struct Score {
    double blank = kLogZero;      // paths ending in blank
    double non_blank = kLogZero;  // paths ending in the last label
    double total() const { return log_add(blank, non_blank); }
  };
  using Beam = std::map<LabelSequence, Score>;
  using Entry = typename Beam::value_type;
  auto better = [](const Entry* a, const Entry* b) {
    const double ta = a->second.total(), tb = b->second.total();
    if (ta != tb) return ta > tb;
    return a->first < b->first;
  };

  Beam beams;
  beams[{}].blank = 0.0;
  for (Index t = 0; t < frames; ++t) {
    Beam next;
    for (const auto& [prefix, sc] : beams) {
      const double total = sc.total();
      for (Index k = 0; k < vocab; ++k) {
        const double p = static_cast<double>(log_probs[t * vocab + k]);
        if (k == blank) {
          Score& dst = next[prefix];
          dst.blank = log_add(dst.blank, total + p);
          continue;
        }
        const int c = static_cast<int>(k);
        LabelSequence ext = prefix;
        ext.push_back(c);
        Score& grown = next[ext];
        if (!prefix.empty() && prefix.back() == c) {
          // Repeats only extend across a blank; otherwise they merge.
          grown.non_blank = log_add(grown.non_blank, sc.blank + p);
          Score& same = next[prefix];
          same.non_blank = log_add(same.non_blank, sc.non_blank + p);
        } else {
          grown.non_blank = log_add(grown.non_blank, total + p);
        }
      }
    }
    std::vector<const Entry*> order;
    order.reserve(next.size());
    for (const auto& e : next) order.push_back(&e);
    std::sort(order.begin(), order.end(), better);
    if (static_cast<Index>(order.size()) > beam) order.resize(beam);
    Beam kept;
    for (const auto* e : order) kept.insert(*e);
    beams = std::move(kept);
  }
  const Entry* best = nullptr;
  for (const auto& e : beams) {
    if (best == nullptr || better(&e, best)) best = &e;
  }
  return best->first;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(' ', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) words.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return words;
}

std::size_t edit_distance(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref) {
  std::vector<std::size_t> row(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[ref.size()];
}

double wer(const std::vector<std::string>& hyp,
           const std::vector<std::string>& ref) {
  if (ref.empty()) throw std::invalid_argument("wer: empty reference");
  return static_cast<double>(edit_distance(hyp, ref)) /
         static_cast<double>(ref.size());
}

#define DISCO_INSTANTIATE_CTC(T)                                             \
  template Var<T> ctc_loss(const Var<T>&, const LabelSequence&, int);        \
  template double ctc_loss_value(const Tensor<T>&, const LabelSequence&,     \
                                 int);                                       \
  template LabelSequence ctc_greedy_decode(const Tensor<T>&, int);           \
  template LabelSequence ctc_beam_decode(const Tensor<T>&, int, int);

DISCO_INSTANTIATE_CTC(float)
DISCO_INSTANTIATE_CTC(double)

}  // namespace disco
