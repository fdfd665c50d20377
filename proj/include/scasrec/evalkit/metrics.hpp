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

#include <span>
#include <vector>

namespace scasrec::evalkit {

/// 1-based position of `gt` in `list`, or 0 when absent.
int rank_of(std::span<const int> list, int gt);

/// Mean reciprocal rank; a rank of 0 (absent) contributes 0.
double mrr(std::span<const int> ranks);

/// 1 iff gt is among the first K items.
int hr_at_k(std::span<const int> list, int gt, int k);

/// Best CR among the first min(K, |list|) items; 0 for an empty list.
double lcr_at_k(std::span<const int> list, std::span<const double> cr, int k);
double lcr(std::span<const int> list, std::span<const double> cr);

/// Items ranked after gt; 0 when gt is absent.
int redundant_count(std::span<const int> list, int gt);

/// Per-list objective: 1/rank(gt) + LCR(list) - alpha * |Z|.
double objective_f(std::span<const int> list, std::span<const double> cr, int gt, double alpha);

}  // namespace scasrec::evalkit
