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

// Independent reference implementations of the three module types.
//
// dense_*: monolithic modules written with plain loops over packed weight
// matrices (all groups concatenated), as a conventional Conformer would
// store them.
// vanilla_*: a conventional module restricted to the core weights, written
// directly with the operator set so it is bit-comparable with the
// disentangled forward.
// Neither calls into DisConformer's forward code.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "disco/disconformer.h"
#include "disco/ops.h"

namespace disco::oracle {

using Mat = Tensor<double>;

inline Mat mm(const Mat& a, const Mat& b) {
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Mat c(Shape{m, n});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

inline Mat plus_bias(Mat a, const Mat& b) {
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) a[i * a.cols() + j] += b[j];
  return a;
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Mat cols_concat(const std::vector<Mat>& parts) {
  Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  const Index rows = parts[0].rows();
  Mat out(parts[0].rank() == 1 ? Shape{cols} : Shape{rows, cols});
  Index off = 0;
  for (const auto& p : parts) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < p.cols(); ++j)
        out[i * cols + off + j] = p[i * p.cols() + j];
    off += p.cols();
  }
  return out;
}

inline Mat rows_concat(const std::vector<Mat>& parts) {
  Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Mat out(Shape{rows, parts[0].cols()});
  Index off = 0;
  for (const auto& p : parts) {
    for (Index i = 0; i < p.numel(); ++i) out[off + i] = p[i];
    off += p.numel();
  }
  return out;
}

inline Mat cols_slice(const Mat& a, Index begin, Index end) {
  Mat out(Shape{a.rows(), end - begin});
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = begin; j < end; ++j) out[i * (end - begin) + j - begin] = a[i * a.cols() + j];
  return out;
}

inline std::string pfx(int layer, const std::string& slot, int group) {
  return "layer" + std::to_string(layer) + "/" + slot + "/" +
         (group < 0 ? std::string("core") : "aug" + std::to_string(group)) + "/";
}

/// Fills every parameter with uniform noise so biases and norms are
/// exercised by the oracles.
template <typename T>
void randomize(DisConformer<T>& model, std::uint64_t seed, double scale = 0.5) {
  Rng rng(seed);
  for (ParamId id = 0; id < model.params().size(); ++id) {
    for (T& v : model.params()[id].value.data()) {
      v = static_cast<T>(rng.uniform(-scale, scale));
    }
  }
}

/// All FF groups packed into one dense [d x f] layer.
inline Mat dense_ff(const DisConformer<double>& m, const Mat& x, int layer,
                    const std::string& slot, const std::vector<int>& groups) {
  const auto& P = m.params();
  auto get = [&](const std::string& n) { return P[P.id(n)].value; };
  std::vector<Mat> w1{get(pfx(layer, slot, -1) + "w1")};
  std::vector<Mat> b1{get(pfx(layer, slot, -1) + "b1")};
  std::vector<Mat> w2{get(pfx(layer, slot, -1) + "w2")};
  for (int g : groups) {
    w1.push_back(get(pfx(layer, slot, g) + "w1"));
    b1.push_back(get(pfx(layer, slot, g) + "b1"));
    w2.push_back(get(pfx(layer, slot, g) + "w2"));
  }
  Mat h = plus_bias(mm(x, cols_concat(w1)), cols_concat(b1));
  for (double& v : h.data()) v = v * sigm(v);
  return plus_bias(mm(h, rows_concat(w2)), get(pfx(layer, slot, -1) + "b2"));
}

/// Standard multi-head attention with packed [d x h*dk] projections and a
/// concatenated [h*dk x d] output projection. Heads are ordered core heads
/// first, then the given augment heads.
inline Mat dense_mha(const DisConformer<double>& m, const Mat& x, int layer,
                     const std::vector<int>& groups) {
  const ModelConfig& c = m.config();
  const auto& P = m.params();
  auto get = [&](const std::string& n) { return P[P.id(n)].value; };
  std::vector<std::string> heads;
  for (int h = 0; h < c.att_core_heads; ++h)
    heads.push_back(pfx(layer, "att", -1) + "head" + std::to_string(h) + "_");
  for (int g : groups) heads.push_back(pfx(layer, "att", g));
  std::vector<Mat> wq, wk, wv, wo;
  for (const auto& h : heads) {
    wq.push_back(get(h + "wq"));
    wk.push_back(get(h + "wk"));
    wv.push_back(get(h + "wv"));
    wo.push_back(get(h + "wo"));
  }
  const Mat Q = mm(x, cols_concat(wq)), K = mm(x, cols_concat(wk)),
            Vv = mm(x, cols_concat(wv));
  const Index T = x.dim(0), dk = c.head_dim();
  std::vector<Mat> outs;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const Mat q = cols_slice(Q, h * dk, (h + 1) * dk);
    const Mat k = cols_slice(K, h * dk, (h + 1) * dk);
    const Mat v = cols_slice(Vv, h * dk, (h + 1) * dk);
    Mat a(Shape{T, T});
    for (Index i = 0; i < T; ++i) {
      double mx = -INFINITY;
      for (Index j = 0; j < T; ++j) {
        double s = 0.0;
        for (Index p = 0; p < dk; ++p) s += q[i * dk + p] * k[j * dk + p];
        s /= std::sqrt(static_cast<double>(dk));
        if (c.rel_pos_bias) {
          const Index P_ = c.rel_pos_max_distance;
          const Index off = std::clamp<Index>(j - i, -P_, P_) + P_;
          s += get(heads[h] + "rel")[off];
        }
        a[i * T + j] = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (Index j = 0; j < T; ++j) z += std::exp(a[i * T + j] - mx);
      for (Index j = 0; j < T; ++j) a[i * T + j] = std::exp(a[i * T + j] - mx) / z;
    }
    outs.push_back(mm(a, v));
  }
  return plus_bias(mm(cols_concat(outs), rows_concat(wo)),
                   get(pfx(layer, "att", -1) + "bo"));
}

/// Conventional conv module over the concatenated channel set:
/// PC1 (GLU) -> depthwise conv -> LN -> swish -> PC2.
inline Mat dense_conv(const DisConformer<double>& m, const Mat& x, int layer,
                      const std::vector<int>& groups) {
  const ModelConfig& c = m.config();
  const auto& P = m.params();
  auto get = [&](const std::string& n) { return P[P.id(n)].value; };
  std::vector<std::string> parts{pfx(layer, "conv", -1)};
  for (int g : groups) parts.push_back(pfx(layer, "conv", g));
  auto cat_cols = [&](const char* n) {
    std::vector<Mat> v;
    for (const auto& p : parts) v.push_back(get(p + n));
    return cols_concat(v);
  };
  auto cat_rows = [&](const char* n) {
    std::vector<Mat> v;
    for (const auto& p : parts) v.push_back(get(p + n));
    return rows_concat(v);
  };
  // Packed PC1 kernel [d x 2C]: value half then gate half.
  const Mat pc1 = cols_concat({cat_cols("pc1_wv"), cat_cols("pc1_wg")});
  const Mat pc1_b = cols_concat({cat_cols("pc1_bv"), cat_cols("pc1_bg")});
  const Mat h2 = plus_bias(mm(x, pc1), pc1_b);
  const Index T = x.dim(0), C = h2.cols() / 2;
  Mat h(Shape{T, C});
  for (Index t = 0; t < T; ++t)
    for (Index j = 0; j < C; ++j)
      h[t * C + j] = h2[t * 2 * C + j] * sigm(h2[t * 2 * C + C + j]);
  const Mat kern = cat_rows("dc_w");
  const Mat dcb = cat_cols("dc_b");
  const Index K = kern.dim(1), half = K / 2;
  Mat d(Shape{T, C});
  for (Index t = 0; t < T; ++t)
    for (Index j = 0; j < C; ++j) {
      double s = dcb[j];
      for (Index q = 0; q < K; ++q) {
        const Index src = t + q - half;
        if (src >= 0 && src < T) s += h[src * C + j] * kern[j * K + q];
      }
      d[t * C + j] = s;
    }
  const Mat g = cat_cols("norm_g"), b = cat_cols("norm_b");
  for (Index t = 0; t < T; ++t) {
    double mu = 0.0, var = 0.0;
    for (Index j = 0; j < C; ++j) mu += d[t * C + j];
    mu /= C;
    for (Index j = 0; j < C; ++j) var += (d[t * C + j] - mu) * (d[t * C + j] - mu);
    var /= C;
    for (Index j = 0; j < C; ++j) {
      const double n = (d[t * C + j] - mu) / std::sqrt(var + c.ln_eps) * g[j] + b[j];
      d[t * C + j] = n * sigm(n);
    }
  }
  return plus_bias(mm(d, cat_rows("pc2_w")), get(pfx(layer, "conv", -1) + "pc2_b"));
}

// Core-only conventional modules built from the operator set.

inline Var<double> vanilla_ff(Tape<double>& t, const DisConformer<double>& m,
                              const Var<double>& x, int layer,
                              const std::string& slot) {
  const auto& P = m.params();
  auto p = [&](const std::string& n) {
    return t.constant(P[P.id(pfx(layer, slot, -1) + n)].value);
  };
  const Var<double> h = swish(add_bias(matmul(x, p("w1")), p("b1")));
  return add_bias(matmul(h, p("w2")), p("b2"));
}

inline Var<double> vanilla_mha(Tape<double>& t, const DisConformer<double>& m,
                               const Var<double>& x, int layer) {
  const ModelConfig& c = m.config();
  const auto& P = m.params();
  auto p = [&](const std::string& n) {
    return t.constant(P[P.id(pfx(layer, "att", -1) + n)].value);
  };
  const double inv = 1.0 / std::sqrt(static_cast<double>(c.head_dim()));
  Var<double> y;
  for (int h = 0; h < c.att_core_heads; ++h) {
    const std::string hp = "head" + std::to_string(h) + "_";
    const Var<double> q = matmul(x, p(hp + "wq")), k = matmul(x, p(hp + "wk")),
                      v = matmul(x, p(hp + "wv"));
    Var<double> s = scale(matmul_bt(q, k), inv);
    if (c.rel_pos_bias) {
      s = add(s, rel_position_bias(p(hp + "rel"), x.value().rows(),
                                   c.rel_pos_max_distance));
    }
    const Var<double> yh = matmul(matmul(softmax(s), v), p(hp + "wo"));
    y = y.valid() ? add(y, yh) : yh;
  }
  return add_bias(y, p("bo"));
}

inline Var<double> vanilla_conv(Tape<double>& t, const DisConformer<double>& m,
                                const Var<double>& x, int layer) {
  const ModelConfig& c = m.config();
  const auto& P = m.params();
  auto p = [&](const std::string& n) {
    return t.constant(P[P.id(pfx(layer, "conv", -1) + n)].value);
  };
  const Var<double> v = add_bias(matmul(x, p("pc1_wv")), p("pc1_bv"));
  const Var<double> g = add_bias(matmul(x, p("pc1_wg")), p("pc1_bg"));
  Var<double> h = mul(v, sigmoid(g));
  h = add_bias(depthwise_conv1d(h, p("dc_w")), p("dc_b"));
  h = swish(layer_norm(h, p("norm_g"), p("norm_b"), c.ln_eps));
  return add_bias(matmul(h, p("pc2_w")), p("pc2_b"));
}

/// Small generalized config with every module kind disentangled.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.num_layers = 2;
  c.output_dim = 6;
  c.feature_dim = 3;
  c.time_reduction = 2;
  c.ff_expert_dim = 3;
  c.ff_core_experts = 2;
  c.ff_aug_experts = 4;
  c.att_core_heads = 2;
  c.att_aug_heads = 2;
  c.rel_pos_bias = false;
  c.rel_pos_max_distance = 3;
  c.conv_channels_per_expert = 2;
  c.conv_core_experts = 2;
  c.conv_aug_experts = 3;
  c.conv_kernel = 3;
  c.dropout = 0.0;
  c.validate();
  return c;
}

}  // namespace disco::oracle
