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

#include "scasrec/diff/param_store.hpp"

#include <cmath>

#include "scasrec/errors.hpp"

namespace scasrec::diff {

int ParamStore::add(std::string name, Tensor init) {
  if (lookup_.contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  const int id = static_cast<int>(params_.size());
  Param p;
  p.name = name;
  p.grad = Tensor(init.rows(), init.cols());
  p.m = Tensor(init.rows(), init.cols());
  p.v = Tensor(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  lookup_.emplace(std::move(name), id);
  return id;
}

bool ParamStore::contains(std::string_view name) const { return lookup_.contains(std::string(name)); }

int ParamStore::index(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double factor) {
  for (auto& p : params_) {
    for (double& g : p.grad.values()) g *= factor;
  }
}

bool ParamStore::grads_finite() const noexcept {
  for (const auto& p : params_) {
    if (!p.grad.all_finite()) return false;
  }
  return true;
}

void adam_step(ParamStore& store, const AdamConfig& config) {
  for (auto& p : store.params()) {
    ++p.step;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(p.step));
    auto value = p.value.values();
    auto grad = p.grad.values();
    auto m = p.m.values();
    auto v = p.v.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      grad[i] = 0.0;
    }
  }
}

}  // namespace scasrec::diff
