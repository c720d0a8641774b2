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

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "disco/params.h"
#include "disco/tensor.h"

namespace disco {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, Index id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  Index id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  /// Gradient after backward(); an all-zero tensor if nothing reached it.
  Tensor<T> grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  Index id_ = -1;
};

/// Reverse-mode recording. Nodes are appended in execution order, so the
/// node list is already a topological order. A tape supports exactly one
/// backward pass; it is single-threaded, but independent tapes may run
/// concurrently over the same (read-only) ParameterStore.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When set, every recorded value is checked for NaN/Inf.
  void set_debug(bool on) { debug_ = on; }
  bool debug() const { return debug_; }

  Var<T> constant(Tensor<T> value) {
    return push("constant", std::move(value), false, {});
  }

  Var<T> variable(Tensor<T> value) {
    return push("variable", std::move(value), true, {});
  }

  /// Binds a stored parameter as a leaf. The value is referenced, not
  /// copied; the store must outlive the tape and stay unmodified until
  /// backward() completes. Binding the same id twice returns the same node.
  Var<T> parameter(const ParameterStore<T>& store, ParamId id,
                   bool trainable = true) {
    if (auto it = bound_.find(id); it != bound_.end()) {
      return Var<T>(this, it->second);
    }
    check_open();
    Node n;
    n.op = "parameter";
    n.external = &store[id].value;
    n.requires_grad = trainable;
    nodes_.push_back(std::move(n));
    const Index nid = static_cast<Index>(nodes_.size()) - 1;
    bound_.emplace(id, nid);
    binding_order_.push_back(id);
    return Var<T>(this, nid);
  }

  /// Records an op result. `fn` receives the output gradient and must
  /// accumulate into its inputs via grad_of().
  Var<T> record(std::string_view op, Tensor<T> value, bool requires_grad,
                BackwardFn fn) {
    return push(op, std::move(value), requires_grad, std::move(fn));
  }

  const Tensor<T>& value(Index id) const {
    const Node& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
  }

  bool requires_grad(Index id) const { return nodes_.at(id).requires_grad; }

  /// Mutable gradient accumulator for a node, zero-allocated on first use.
  Tensor<T>& grad_of(Index id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
    return n.grad;
  }

  Tensor<T> grad(Index id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.empty()) return Tensor<T>(value(id).shape());
    return n.grad;
  }

  void backward(const Var<T>& loss) {
    if (loss.valid() && &loss.tape() != this) {
      throw std::invalid_argument("backward: loss belongs to another tape");
    }
    if (consumed_) {
      throw std::logic_error("backward: tape already consumed");
    }
    if (value(loss.id()).numel() != 1) {
      throw DimensionError("backward: loss must be scalar, got " +
                           shape_string(value(loss.id()).shape()));
    }
    consumed_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    grad_of(loss.id())[0] = T{1};
    for (Index i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

  bool consumed() const { return consumed_; }
  Index size() const { return static_cast<Index>(nodes_.size()); }

  /// Parameter ids bound to this tape, in first-use order.
  const std::vector<ParamId>& bound_params() const { return binding_order_; }

  bool is_bound(ParamId id) const { return bound_.count(id) > 0; }

  /// Adds bound parameter gradients into `out` (sized to the store).
  void accumulate_param_grads(GradBuffer<T>& out) const {
    for (ParamId pid : binding_order_) {
      const Node& n = nodes_[bound_.at(pid)];
      if (!n.requires_grad || n.grad.empty()) continue;
      Tensor<T>& dst = out.at(pid);
      if (dst.empty()) {
        dst = n.grad;
      } else {
        for (Index k = 0; k < dst.numel(); ++k) dst[k] += n.grad[k];
      }
    }
  }

  Tensor<T> param_grad(ParamId pid) const {
    auto it = bound_.find(pid);
    if (it == bound_.end()) throw std::out_of_range("parameter not bound");
    return grad(it->second);
  }

 private:
  struct Node {
    std::string_view op;
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_open() const {
    if (consumed_) {
      throw std::logic_error("tape already consumed by backward()");
    }
  }

  Var<T> push(std::string_view op, Tensor<T> value, bool requires_grad,
              BackwardFn fn) {
    check_open();
    if (debug_) {
      for (T v : value.data()) {
        if (!std::isfinite(v)) {
          throw NumericError("non-finite value produced by " +
                             std::string(op));
        }
      }
    }
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<Index>(nodes_.size()) - 1);
  }

  // A deque so references returned by value() survive later pushes.
  std::deque<Node> nodes_;
  std::unordered_map<ParamId, Index> bound_;
  std::vector<ParamId> binding_order_;
  bool consumed_ = false;
  bool debug_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

template <typename T>
Tensor<T> Var<T>::grad() const {
  return tape_->grad(id_);
}

}  // namespace disco
