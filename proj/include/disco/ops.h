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

// Differentiable operator set. Matrix ops treat a tensor as
// [rows x cols] where cols is the last dimension; "last axis" ops
// (softmax, layer_norm, glu) operate independently on each row.

#include <span>
#include <vector>

#include "disco/autodiff.h"
#include "disco/random.h"

namespace disco {

// [m x k] * [k x n] -> [m x n]
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);

// [m x k] * [n x k]^T -> [m x n]
template <typename T>
Var<T> matmul_bt(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> transpose(const Var<T>& a);

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> scale(const Var<T>& a, T factor);

/// Adds a length-n vector to every row of an [m x n] input.
template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& bias);

template <typename T>
Var<T> exp(const Var<T>& a);

template <typename T>
Var<T> sigmoid(const Var<T>& a);

/// x * sigmoid(x)
template <typename T>
Var<T> swish(const Var<T>& a);

/// Splits the last axis in halves [a | g] and returns a * sigmoid(g).
template <typename T>
Var<T> glu(const Var<T>& a);

template <typename T>
Var<T> softmax(const Var<T>& a);

/// Max-subtracted log-softmax over the last axis.
template <typename T>
Var<T> log_softmax(const Var<T>& a);

/// Per-row normalization to zero mean / unit (biased) variance, then affine.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias,
                  T eps = T(1e-5));

/// Per-channel 1-D convolution over time with zero "same" padding.
/// x: [T x C], kernel: [C x K] with K odd.
template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& kernel);

/// Inverted dropout; the identity when !training or p == 0.
template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng, bool training);

template <typename T>
Var<T> slice_rows(const Var<T>& a, Index begin, Index end);

template <typename T>
Var<T> slice_cols(const Var<T>& a, Index begin, Index end);

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts);

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts);

/// Appends zero rows until the input has `total_rows` rows.
template <typename T>
Var<T> pad_rows(const Var<T>& a, Index total_rows);

template <typename T>
Var<T> sum(const Var<T>& a);

template <typename T>
Var<T> mean(const Var<T>& a);

/// Expands a learned table of 2*max_distance+1 offsets into a [len x len]
/// bias with out[i][j] = table[clamp(j - i) + max_distance].
template <typename T>
Var<T> rel_position_bias(const Var<T>& table, Index len, Index max_distance);

}  // namespace disco
