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

#include <functional>
#include <string>

#include "scasrec/diff/graph.hpp"
#include "scasrec/diff/param_store.hpp"

namespace scasrec::diff {

// Builds a scalar loss on `graph` from the current values in `store`.
using LossBuilder = std::function<Var(Graph& graph, ParamStore& store)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Applied to the analytic gradients before comparison. Negative-control hook.
  std::function<void(ParamStore&)> tamper;
};

/// Compares reverse-mode gradients against central differences for every
/// scalar of every parameter. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// Throws DeterminismError if two evaluations at the same point differ.
GradCheckResult grad_check(ParamStore& store, const LossBuilder& loss, const GradCheckOptions& options = {});

}  // namespace scasrec::diff
