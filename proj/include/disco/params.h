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

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "disco/tensor.h"

namespace disco {

using ParamId = int;

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Named, densely indexed parameter storage. Ids are stable for the lifetime
/// of the store.
template <typename T>
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor<T> value) {
    if (by_name_.count(name)) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    const ParamId id = static_cast<ParamId>(params_.size());
    by_name_.emplace(name, id);
    params_.push_back({std::move(name), std::move(value)});
    return id;
  }

  int size() const { return static_cast<int>(params_.size()); }
  const Parameter<T>& operator[](ParamId id) const { return params_.at(id); }
  Parameter<T>& operator[](ParamId id) { return params_.at(id); }

  std::optional<ParamId> find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  ParamId id(const std::string& name) const {
    auto found = find(name);
    if (!found) throw std::out_of_range("unknown parameter: " + name);
    return *found;
  }

  Index numel() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, ParamId> by_name_;
};

/// Gradients indexed by ParamId; entries stay empty until written.
template <typename T>
using GradBuffer = std::vector<Tensor<T>>;

/// Per-parameter trainability flags indexed by ParamId.
using TrainableMask = std::vector<bool>;

}  // namespace disco
