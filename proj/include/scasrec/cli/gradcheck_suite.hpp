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
#include <string>
#include <vector>

namespace scasrec::cli {

struct ComponentCheck {
  std::string component;
  double max_rel_error = 0.0;
  std::string worst;  // parameter[index] with the largest error
  bool pass = false;
};

/// Component names in report order.
const std::vector<std::string>& gradcheck_components();

/// Central-difference check of every component on a fresh N = 5, F = 8
/// instance drawn from `seed`. `corrupt` names a component whose analytic
/// gradient is perturbed before comparison (negative control).
std::vector<ComponentCheck> run_gradcheck_suite(std::uint64_t seed, const std::string& corrupt = "");

}  // namespace scasrec::cli
