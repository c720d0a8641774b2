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

#include "disco/ops.h"

#include <algorithm>
#include <cmath>

namespace disco {
namespace {

template <typename T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) +
                                ": operands recorded on different tapes");
  }
  return a.tape();
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
void require_matrix(const Var<T>& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(a.shape()));
  }
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (Index p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (Index j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (Index j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = 0;
      for (Index p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, Index m, Index k, Index n) {
  for (Index i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (Index p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * n;
      for (Index j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(const Var<T>& a, std::string_view name, Fwd fwd, Deriv deriv) {
  Tape<T>& tape = a.tape();
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (Index i = 0; i < x.numel(); ++i) y[i] = fwd(x[i]);
  const Index ia = a.id();
  return tape.record(name, std::move(y), a.requires_grad(),
                     [ia, deriv](Tape<T>& t, const Tensor<T>& g) {
                       const Tensor<T>& xv = t.value(ia);
                       Tensor<T>& ga = t.grad_of(ia);
                       for (Index i = 0; i < g.numel(); ++i) {
                         ga[i] += g[i] * deriv(xv[i]);
                       }
                     });
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b, "matmul");
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const Index m = a.value().dim(0), k = a.value().dim(1);
  const Index n = b.value().dim(1);
  if (b.value().dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree: " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor<T> y(Shape{m, n});
  gemm_nn(a.value().data().data(), b.value().data().data(), y.data().data(),
          m, k, n);
  const Index ia = a.id(), ib = b.id();
  return tape.record(
      "matmul", std::move(y), a.requires_grad() || b.requires_grad(),
      [ia, ib, m, k, n](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(ia)) {
          gemm_nt(g.data().data(), t.value(ib).data().data(),
                  t.grad_of(ia).data().data(), m, n, k);
        }
        if (t.requires_grad(ib)) {
          gemm_tn(t.value(ia).data().data(), g.data().data(),
                  t.grad_of(ib).data().data(), m, k, n);
        }
      });
}

template <typename T>
Var<T> matmul_bt(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b, "matmul_bt");
  require_matrix(a, "matmul_bt");
  require_matrix(b, "matmul_bt");
  const Index m = a.value().dim(0), k = a.value().dim(1);
  const Index n = b.value().dim(0);
  if (b.value().dim(1) != k) {
    throw DimensionError("matmul_bt: inner dimensions disagree: " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  Tensor<T> y(Shape{m, n});
  gemm_nt(a.value().data().data(), b.value().data().data(), y.data().data(),
          m, k, n);
  const Index ia = a.id(), ib = b.id();
  return tape.record(
      "matmul_bt", std::move(y), a.requires_grad() || b.requires_grad(),
      [ia, ib, m, k, n](Tape<T>& t, const Tensor<T>& g) {
        // Y = A B^T: dA = dY B, dB = dY^T A
        if (t.requires_grad(ia)) {
          gemm_nn(g.data().data(), t.value(ib).data().data(),
                  t.grad_of(ia).data().data(), m, n, k);
        }
        if (t.requires_grad(ib)) {
          gemm_tn(g.data().data(), t.value(ia).data().data(),
                  t.grad_of(ib).data().data(), m, n, k);
        }
      });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  require_matrix(a, "transpose");
  const Index m = a.value().dim(0), n = a.value().dim(1);
  Tensor<T> y(Shape{n, m});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) y[j * m + i] = a.value()[i * n + j];
  const Index ia = a.id();
  return a.tape().record("transpose", std::move(y), a.requires_grad(),
                         [ia, m, n](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < m; ++i)
                             for (Index j = 0; j < n; ++j)
                               ga[i * n + j] += g[j * m + i];
                         });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> y = a.value().reshaped(std::move(shape));
  const Index ia = a.id();
  return a.tape().record("reshape", std::move(y), a.requires_grad(),
                         [ia](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < g.numel(); ++i) ga[i] += g[i];
                         });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tensor<T> y(a.shape());
  for (Index i = 0; i < y.numel(); ++i) y[i] = a.value()[i] + b.value()[i];
  const Index ia = a.id(), ib = b.id();
  return tape.record("add", std::move(y),
                     a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                       for (Index id : {ia, ib}) {
                         if (!t.requires_grad(id)) continue;
                         Tensor<T>& gx = t.grad_of(id);
                         for (Index i = 0; i < g.numel(); ++i) gx[i] += g[i];
                       }
                     });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tensor<T> y(a.shape());
  for (Index i = 0; i < y.numel(); ++i) y[i] = a.value()[i] - b.value()[i];
  const Index ia = a.id(), ib = b.id();
  return tape.record("sub", std::move(y),
                     a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                       if (t.requires_grad(ia)) {
                         Tensor<T>& gx = t.grad_of(ia);
                         for (Index i = 0; i < g.numel(); ++i) gx[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor<T>& gx = t.grad_of(ib);
                         for (Index i = 0; i < g.numel(); ++i) gx[i] -= g[i];
                       }
                     });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  Tensor<T> y(a.shape());
  for (Index i = 0; i < y.numel(); ++i) y[i] = a.value()[i] * b.value()[i];
  const Index ia = a.id(), ib = b.id();
  return tape.record("mul", std::move(y),
                     a.requires_grad() || b.requires_grad(),
                     [ia, ib](Tape<T>& t, const Tensor<T>& g) {
                       const Tensor<T>& av = t.value(ia);
                       const Tensor<T>& bv = t.value(ib);
                       if (t.requires_grad(ia)) {
                         Tensor<T>& gx = t.grad_of(ia);
                         for (Index i = 0; i < g.numel(); ++i)
                           gx[i] += g[i] * bv[i];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor<T>& gx = t.grad_of(ib);
                         for (Index i = 0; i < g.numel(); ++i)
                           gx[i] += g[i] * av[i];
                       }
                     });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> y(a.shape());
  for (Index i = 0; i < y.numel(); ++i) y[i] = a.value()[i] * factor;
  const Index ia = a.id();
  return a.tape().record("scale", std::move(y), a.requires_grad(),
                         [ia, factor](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < g.numel(); ++i)
                             ga[i] += g[i] * factor;
                         });
}

template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& bias) {
  Tape<T>& tape = same_tape(a, bias, "add_bias");
  const Index n = a.value().cols();
  if (bias.value().numel() != n) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) +
                         " does not match columns of " +
                         shape_string(a.shape()));
  }
  const Index m = a.value().rows();
  Tensor<T> y(a.shape());
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      y[i * n + j] = a.value()[i * n + j] + bias.value()[j];
  const Index ia = a.id(), ib = bias.id();
  return tape.record("add_bias", std::move(y),
                     a.requires_grad() || bias.requires_grad(),
                     [ia, ib, m, n](Tape<T>& t, const Tensor<T>& g) {
                       if (t.requires_grad(ia)) {
                         Tensor<T>& ga = t.grad_of(ia);
                         for (Index i = 0; i < g.numel(); ++i) ga[i] += g[i];
                       }
                       if (t.requires_grad(ib)) {
                         Tensor<T>& gb = t.grad_of(ib);
                         for (Index i = 0; i < m; ++i)
                           for (Index j = 0; j < n; ++j)
                             gb[j] += g[i * n + j];
                       }
                     });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return unary<T>(
      a, "exp", [](T x) { return std::exp(x); },
      [](T x) { return std::exp(x); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return unary<T>(
      a, "sigmoid", [](T x) { return sigmoid_scalar(x); },
      [](T x) {
        const T s = sigmoid_scalar(x);
        return s * (T(1) - s);
      });
}

template <typename T>
Var<T> swish(const Var<T>& a) {
  return unary<T>(
      a, "swish", [](T x) { return x * sigmoid_scalar(x); },
      [](T x) {
        const T s = sigmoid_scalar(x);
        return s + x * s * (T(1) - s);
      });
}

template <typename T>
Var<T> glu(const Var<T>& a) {
  const Index cols = a.value().cols();
  if (cols % 2 != 0) {
    throw DimensionError("glu: last axis must be even, got " +
                         shape_string(a.shape()));
  }
  const Index rows = a.value().rows(), half = cols / 2;
  Shape out_shape = a.shape();
  out_shape.back() = half;
  Tensor<T> y(out_shape);
  const Tensor<T>& x = a.value();
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < half; ++c)
      y[r * half + c] =
          x[r * cols + c] * sigmoid_scalar(x[r * cols + half + c]);
  const Index ia = a.id();
  return a.tape().record(
      "glu", std::move(y), a.requires_grad(),
      [ia, rows, cols, half](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& xv = t.value(ia);
        Tensor<T>& ga = t.grad_of(ia);
        for (Index r = 0; r < rows; ++r) {
          for (Index c = 0; c < half; ++c) {
            const T av = xv[r * cols + c];
            const T s = sigmoid_scalar(xv[r * cols + half + c]);
            const T gy = g[r * half + c];
            ga[r * cols + c] += gy * s;
            ga[r * cols + half + c] += gy * av * s * (T(1) - s);
          }
        }
      });
}

template <typename T>
Var<T> softmax(const Var<T>& a) {
  const Index rows = a.value().rows(), cols = a.value().cols();
  const Tensor<T>& x = a.value();
  Tensor<T> y(a.shape());
  for (Index r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * cols;
    T* yr = y.data().data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T z = 0;
    for (Index c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      z += yr[c];
    }
    for (Index c = 0; c < cols; ++c) yr[c] /= z;
  }
  const Index ia = a.id();
  Tensor<T> saved = y;
  return a.tape().record(
      "softmax", std::move(y), a.requires_grad(),
      [ia, rows, cols, s = std::move(saved)](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& ga = t.grad_of(ia);
        for (Index r = 0; r < rows; ++r) {
          T dot = 0;
          for (Index c = 0; c < cols; ++c)
            dot += g[r * cols + c] * s[r * cols + c];
          for (Index c = 0; c < cols; ++c)
            ga[r * cols + c] += s[r * cols + c] * (g[r * cols + c] - dot);
        }
      });
}

template <typename T>
Var<T> log_softmax(const Var<T>& a) {
  const Index rows = a.value().rows(), cols = a.value().cols();
  const Tensor<T>& x = a.value();
  Tensor<T> y(a.shape());
  for (Index r = 0; r < rows; ++r) {
    const T* xr = x.data().data() + r * cols;
    T* yr = y.data().data() + r * cols;
    const T mx = *std::max_element(xr, xr + cols);
    T z = 0;
    for (Index c = 0; c < cols; ++c) z += std::exp(xr[c] - mx);
    const T lz = mx + std::log(z);
    for (Index c = 0; c < cols; ++c) yr[c] = xr[c] - lz;
  }
  const Index ia = a.id();
  const Index io = a.tape().size();  // id this output will receive
  return a.tape().record(
      "log_softmax", std::move(y), a.requires_grad(),
      [ia, io, rows, cols](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& yv = t.value(io);
        Tensor<T>& ga = t.grad_of(ia);
        for (Index r = 0; r < rows; ++r) {
          T gs = 0;
          for (Index c = 0; c < cols; ++c) gs += g[r * cols + c];
          for (Index c = 0; c < cols; ++c)
            ga[r * cols + c] +=
                g[r * cols + c] - std::exp(yv[r * cols + c]) * gs;
        }
      });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias,
                  T eps) {
  Tape<T>& tape = same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  const Index rows = x.value().rows(), d = x.value().cols();
  if (gain.value().numel() != d || bias.value().numel() != d) {
    throw DimensionError("layer_norm: gain " + shape_string(gain.shape()) +
                         " / bias " + shape_string(bias.shape()) +
                         " do not match last axis of " +
                         shape_string(x.shape()));
  }
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  const Tensor<T>& xv = x.value();
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const T* xr = xv.data().data() + r * d;
    T mu = 0;
    for (Index c = 0; c < d; ++c) mu += xr[c];
    mu /= static_cast<T>(d);
    T var = 0;
    for (Index c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (Index c = 0; c < d; ++c) {
      const T h = (xr[c] - mu) * is;
      xhat[r * d + c] = h;
      y[r * d + c] = h * gain.value()[c] + bias.value()[c];
    }
  }
  const Index ix = x.id(), ig = gain.id(), ib = bias.id();
  return tape.record(
      "layer_norm", std::move(y),
      x.requires_grad() || gain.requires_grad() || bias.requires_grad(),
      [ix, ig, ib, rows, d, xh = std::move(xhat),
       is = std::move(inv_std)](Tape<T>& t, const Tensor<T>& g) {
        const Tensor<T>& gv = t.value(ig);
        if (t.requires_grad(ig)) {
          Tensor<T>& gg = t.grad_of(ig);
          for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < d; ++c)
              gg[c] += g[r * d + c] * xh[r * d + c];
        }
        if (t.requires_grad(ib)) {
          Tensor<T>& gb = t.grad_of(ib);
          for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < d; ++c) gb[c] += g[r * d + c];
        }
        if (t.requires_grad(ix)) {
          Tensor<T>& gx = t.grad_of(ix);
          for (Index r = 0; r < rows; ++r) {
            T m1 = 0, m2 = 0;
            for (Index c = 0; c < d; ++c) {
              const T dh = g[r * d + c] * gv[c];
              m1 += dh;
              m2 += dh * xh[r * d + c];
            }
            m1 /= static_cast<T>(d);
            m2 /= static_cast<T>(d);
            for (Index c = 0; c < d; ++c) {
              const T dh = g[r * d + c] * gv[c];
              gx[r * d + c] += is[r] * (dh - m1 - xh[r * d + c] * m2);
            }
          }
        }
      });
}

template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& kernel) {
  Tape<T>& tape = same_tape(x, kernel, "depthwise_conv1d");
  require_matrix(x, "depthwise_conv1d");
  require_matrix(kernel, "depthwise_conv1d");
  const Index len = x.value().dim(0), ch = x.value().dim(1);
  const Index k = kernel.value().dim(1);
  if (kernel.value().dim(0) != ch) {
    throw DimensionError("depthwise_conv1d: kernel " +
                         shape_string(kernel.shape()) +
                         " does not match channels of " +
                         shape_string(x.shape()));
  }
  if (k % 2 == 0) {
    throw std::invalid_argument("depthwise_conv1d: kernel size must be odd, got " +
                                std::to_string(k));
  }
  const Index pad = (k - 1) / 2;
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = kernel.value();
  Tensor<T> y(Shape{len, ch});
  for (Index t = 0; t < len; ++t) {
    for (Index j = 0; j < k; ++j) {
      const Index src = t + j - pad;
      if (src < 0 || src >= len) continue;
      for (Index c = 0; c < ch; ++c)
        y[t * ch + c] += xv[src * ch + c] * wv[c * k + j];
    }
  }
  const Index ix = x.id(), iw = kernel.id();
  return tape.record(
      "depthwise_conv1d", std::move(y),
      x.requires_grad() || kernel.requires_grad(),
      [ix, iw, len, ch, k, pad](Tape<T>& tp, const Tensor<T>& g) {
        const Tensor<T>& xv2 = tp.value(ix);
        const Tensor<T>& wv2 = tp.value(iw);
        const bool gx_on = tp.requires_grad(ix), gw_on = tp.requires_grad(iw);
        Tensor<T>* gx = gx_on ? &tp.grad_of(ix) : nullptr;
        Tensor<T>* gw = gw_on ? &tp.grad_of(iw) : nullptr;
        for (Index t = 0; t < len; ++t) {
          for (Index j = 0; j < k; ++j) {
            const Index src = t + j - pad;
            if (src < 0 || src >= len) continue;
            for (Index c = 0; c < ch; ++c) {
              const T gy = g[t * ch + c];
              if (gx) (*gx)[src * ch + c] += gy * wv2[c * k + j];
              if (gw) (*gw)[c * k + j] += gy * xv2[src * ch + c];
            }
          }
        }
      });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  Tensor<T> mask(x.shape());
  Tensor<T> y(x.shape());
  for (Index i = 0; i < y.numel(); ++i) {
    mask[i] = rng.bernoulli(p) ? T(0) : keep_scale;
    y[i] = x.value()[i] * mask[i];
  }
  const Index ix = x.id();
  return x.tape().record("dropout", std::move(y), x.requires_grad(),
                         [ix, m = std::move(mask)](Tape<T>& t,
                                                   const Tensor<T>& g) {
                           Tensor<T>& gx = t.grad_of(ix);
                           for (Index i = 0; i < g.numel(); ++i)
                             gx[i] += g[i] * m[i];
                         });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Index begin, Index end) {
  require_matrix(a, "slice_rows");
  const Index rows = a.value().dim(0), cols = a.value().dim(1);
  if (begin < 0 || end > rows || begin >= end) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " +
                         shape_string(a.shape()));
  }
  Tensor<T> y(Shape{end - begin, cols});
  std::copy(a.value().data().begin() + begin * cols,
            a.value().data().begin() + end * cols, y.data().begin());
  const Index ia = a.id();
  return a.tape().record("slice_rows", std::move(y), a.requires_grad(),
                         [ia, begin, cols](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < g.numel(); ++i)
                             ga[begin * cols + i] += g[i];
                         });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Index begin, Index end) {
  const Index rows = a.value().rows(), cols = a.value().cols();
  if (begin < 0 || end > cols || begin >= end) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " +
                         shape_string(a.shape()));
  }
  const Index w = end - begin;
  Shape out_shape = a.shape();
  out_shape.back() = w;
  Tensor<T> y(out_shape);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < w; ++c) y[r * w + c] = a.value()[r * cols + begin + c];
  const Index ia = a.id();
  return a.tape().record(
      "slice_cols", std::move(y), a.requires_grad(),
      [ia, rows, cols, begin, w](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& ga = t.grad_of(ia);
        for (Index r = 0; r < rows; ++r)
          for (Index c = 0; c < w; ++c) ga[r * cols + begin + c] += g[r * w + c];
      });
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape<T>& tape = parts[0].tape();
  const Index cols = parts[0].value().cols();
  Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    same_tape(parts[0], p, "concat_rows");
    if (p.value().cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    rows += p.value().rows();
    rg = rg || p.requires_grad();
  }
  Tensor<T> y(Shape{rows, cols});
  std::vector<Index> ids, offsets;
  Index off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(),
              y.data().begin() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.value().numel();
  }
  return tape.record("concat_rows", std::move(y), rg,
                     [ids, offsets](Tape<T>& t, const Tensor<T>& g) {
                       for (std::size_t q = 0; q < ids.size(); ++q) {
                         if (!t.requires_grad(ids[q])) continue;
                         Tensor<T>& gp = t.grad_of(ids[q]);
                         for (Index i = 0; i < gp.numel(); ++i)
                           gp[i] += g[offsets[q] + i];
                       }
                     });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape<T>& tape = parts[0].tape();
  const Index rows = parts[0].value().rows();
  Index cols = 0;
  bool rg = false;
  for (const auto& p : parts) {
    same_tape(parts[0], p, "concat_cols");
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    }
    cols += p.value().cols();
    rg = rg || p.requires_grad();
  }
  Shape out_shape = parts[0].shape();
  out_shape.back() = cols;
  if (out_shape.size() == 1) out_shape = Shape{cols};
  Tensor<T> y(out_shape);
  std::vector<Index> ids, offsets, widths;
  Index off = 0;
  for (const auto& p : parts) {
    const Index w = p.value().cols();
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < w; ++c) y[r * cols + off + c] = p.value()[r * w + c];
    ids.push_back(p.id());
    offsets.push_back(off);
    widths.push_back(w);
    off += w;
  }
  return tape.record(
      "concat_cols", std::move(y), rg,
      [ids, offsets, widths, rows, cols](Tape<T>& t, const Tensor<T>& g) {
        for (std::size_t q = 0; q < ids.size(); ++q) {
          if (!t.requires_grad(ids[q])) continue;
          Tensor<T>& gp = t.grad_of(ids[q]);
          const Index w = widths[q];
          for (Index r = 0; r < rows; ++r)
            for (Index c = 0; c < w; ++c)
              gp[r * w + c] += g[r * cols + offsets[q] + c];
        }
      });
}

template <typename T>
Var<T> pad_rows(const Var<T>& a, Index total_rows) {
  require_matrix(a, "pad_rows");
  const Index rows = a.value().dim(0), cols = a.value().dim(1);
  if (total_rows < rows) {
    throw DimensionError("pad_rows: target " + std::to_string(total_rows) +
                         " rows is smaller than " + shape_string(a.shape()));
  }
  if (total_rows == rows) return a;
  Tensor<T> y(Shape{total_rows, cols});
  std::copy(a.value().data().begin(), a.value().data().end(),
            y.data().begin());
  const Index ia = a.id(), n = a.value().numel();
  return a.tape().record("pad_rows", std::move(y), a.requires_grad(),
                         [ia, n](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < n; ++i) ga[i] += g[i];
                         });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().data()) s += v;
  const Index ia = a.id();
  return a.tape().record("sum", Tensor<T>::scalar(s), a.requires_grad(),
                         [ia](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < ga.numel(); ++i) ga[i] += g[0];
                         });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const T n = static_cast<T>(a.value().numel());
  T s = 0;
  for (T v : a.value().data()) s += v;
  const Index ia = a.id();
  return a.tape().record("mean", Tensor<T>::scalar(s / n), a.requires_grad(),
                         [ia, n](Tape<T>& t, const Tensor<T>& g) {
                           Tensor<T>& ga = t.grad_of(ia);
                           for (Index i = 0; i < ga.numel(); ++i)
                             ga[i] += g[0] / n;
                         });
}

template <typename T>
Var<T> rel_position_bias(const Var<T>& table, Index len, Index max_distance) {
  if (table.value().numel() != 2 * max_distance + 1) {
    throw DimensionError("rel_position_bias: table " +
                         shape_string(table.shape()) + " does not hold " +
                         std::to_string(2 * max_distance + 1) + " offsets");
  }
  auto slot = [max_distance](Index i, Index j) {
    return std::clamp<Index>(j - i, -max_distance, max_distance) +
           max_distance;
  };
  Tensor<T> y(Shape{len, len});
  for (Index i = 0; i < len; ++i)
    for (Index j = 0; j < len; ++j) y[i * len + j] = table.value()[slot(i, j)];
  const Index it = table.id();
  return table.tape().record(
      "rel_position_bias", std::move(y), table.requires_grad(),
      [it, len, slot](Tape<T>& t, const Tensor<T>& g) {
        Tensor<T>& gt = t.grad_of(it);
        for (Index i = 0; i < len; ++i)
          for (Index j = 0; j < len; ++j) gt[slot(i, j)] += g[i * len + j];
      });
}

#define DISCO_INSTANTIATE_OPS(T)                                             \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                      \
  template Var<T> matmul_bt(const Var<T>&, const Var<T>&);                   \
  template Var<T> transpose(const Var<T>&);                                  \
  template Var<T> reshape(const Var<T>&, Shape);                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                         \
  template Var<T> sub(const Var<T>&, const Var<T>&);                         \
  template Var<T> mul(const Var<T>&, const Var<T>&);                         \
  template Var<T> scale(const Var<T>&, T);                                   \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                    \
  template Var<T> exp(const Var<T>&);                                        \
  template Var<T> sigmoid(const Var<T>&);                                    \
  template Var<T> swish(const Var<T>&);                                      \
  template Var<T> glu(const Var<T>&);                                        \
  template Var<T> softmax(const Var<T>&);                                    \
  template Var<T> log_softmax(const Var<T>&);                                \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T); \
  template Var<T> depthwise_conv1d(const Var<T>&, const Var<T>&);            \
  template Var<T> dropout(const Var<T>&, double, Rng&, bool);                \
  template Var<T> slice_rows(const Var<T>&, Index, Index);                   \
  template Var<T> slice_cols(const Var<T>&, Index, Index);                   \
  template Var<T> concat_rows(std::span<const Var<T>>);                      \
  template Var<T> concat_cols(std::span<const Var<T>>);                      \
  template Var<T> pad_rows(const Var<T>&, Index);                            \
  template Var<T> sum(const Var<T>&);                                        \
  template Var<T> mean(const Var<T>&);                                       \
  template Var<T> rel_position_bias(const Var<T>&, Index, Index);

DISCO_INSTANTIATE_OPS(float)
DISCO_INSTANTIATE_OPS(double)

}  // namespace disco
