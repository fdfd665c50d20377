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

#include "scasrec/diff/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "scasrec/errors.hpp"

namespace scasrec::diff {

namespace {

double evaluate(ParamStore& store, const LossBuilder& loss) {
  Graph g(false);
  return loss(g, store).item();
}

}  // namespace

GradCheckResult grad_check(ParamStore& store, const LossBuilder& loss, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("grad_check: step must be positive");

  const double first = evaluate(store, loss);
  const double second = evaluate(store, loss);
  if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second)) {
    throw DeterminismError("grad_check: loss is not deterministic (" + std::to_string(first) + " vs " +
                           std::to_string(second) + ")");
  }

  store.zero_grad();
  {
    Graph g(true);
    Var l = loss(g, store);
    backward(g, l);
  }
  if (options.tamper) options.tamper(store);

  std::vector<Tensor> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store.params()) analytic.push_back(p.grad);
  store.zero_grad();

  GradCheckResult result;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    Param& p = store.at(static_cast<int>(pi));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = evaluate(store, loss);
      p.value[i] = saved - options.step;
      const double down = evaluate(store, loss);
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = rel;
        result.worst_param = p.name;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  result.pass = result.max_rel_error <= options.tolerance;
  return result;
}

}  // namespace scasrec::diff
