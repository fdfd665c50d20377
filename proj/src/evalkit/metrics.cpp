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

#include "scasrec/evalkit/metrics.hpp"

#include <algorithm>

#include "scasrec/errors.hpp"

namespace scasrec::evalkit {

int rank_of(std::span<const int> list, int gt) {
  const auto it = std::find(list.begin(), list.end(), gt);
  return it == list.end() ? 0 : static_cast<int>(it - list.begin()) + 1;
}

double mrr(std::span<const int> ranks) {
  if (ranks.empty()) return 0.0;
  double total = 0.0;
  for (int r : ranks) {
    if (r < 0) throw ContractError("mrr: negative rank");
    if (r > 0) total += 1.0 / r;
  }
  return total / static_cast<double>(ranks.size());
}

int hr_at_k(std::span<const int> list, int gt, int k) {
  if (k < 1) throw ContractError("hr_at_k: K must be >= 1");
  const int r = rank_of(list, gt);
  return r > 0 && r <= k ? 1 : 0;
}

double lcr_at_k(std::span<const int> list, std::span<const double> cr, int k) {
  if (k < 1) throw ContractError("lcr_at_k: K must be >= 1");
  double best = 0.0;
  const std::size_t end = std::min(list.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < end; ++i) best = std::max(best, cr[static_cast<std::size_t>(list[i])]);
  return best;
}

double lcr(std::span<const int> list, std::span<const double> cr) {
  double best = 0.0;
  for (int i : list) best = std::max(best, cr[static_cast<std::size_t>(i)]);
  return best;
}

int redundant_count(std::span<const int> list, int gt) {
  const int r = rank_of(list, gt);
  return r == 0 ? 0 : static_cast<int>(list.size()) - r;
}

double objective_f(std::span<const int> list, std::span<const double> cr, int gt, double alpha) {
  if (alpha < 0.0) throw ContractError("objective_f: alpha must be >= 0");
  const int r = rank_of(list, gt);
  const double rr = r > 0 ? 1.0 / r : 0.0;
  return rr + lcr(list, cr) - alpha * redundant_count(list, gt);
}

}  // namespace scasrec::evalkit
