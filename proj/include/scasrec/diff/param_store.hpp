// Copyright 2026 The SCASRec Authors.
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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "scasrec/diff/tensor.hpp"

namespace scasrec::diff {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
  std::int64_t step = 0;
};

/// Named trainable tensors plus their gradient accumulators and optimizer
/// moments. Insertion order is stable and used for serialization.
class ParamStore {
 public:
  int add(std::string name, Tensor init);
  bool contains(std::string_view name) const;
  int index(std::string_view name) const;

  Param& at(int i) { return params_.at(static_cast<std::size_t>(i)); }
  const Param& at(int i) const { return params_.at(static_cast<std::size_t>(i)); }
  Param& operator[](std::string_view name) { return at(index(name)); }
  const Param& operator[](std::string_view name) const { return at(index(name)); }

  std::span<Param> params() noexcept { return params_; }
  std::span<const Param> params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;

  void zero_grad();
  void scale_grad(double factor);
  bool grads_finite() const noexcept;

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, int> lookup_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam update of every parameter; clears gradients afterwards.
void adam_step(ParamStore& store, const AdamConfig& config = {});

}  // namespace scasrec::diff
