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

#include "scasrec/world/dataset.hpp"

namespace scasrec::testing {

// A world small enough for unit tests: 6x6 grid, at most 5 candidates.
inline world::WorldConfig small_world(std::uint64_t seed) {
  world::WorldConfig c;
  c.grid_width = 6;
  c.grid_height = 6;
  c.max_candidates = 5;
  c.history_length = 3;
  c.users = 10;
  c.seed = seed;
  return c;
}

}  // namespace scasrec::testing

#include "scasrec/features/features.hpp"
#include "scasrec/model/model.hpp"

namespace scasrec::testing {

// Width-8 model for fast checks. Stats are fitted on `samples`.
inline model::Model tiny_model(const std::vector<world::Sample>& samples, std::uint64_t seed) {
  model::ModelConfig c;
  c.features.model_width = 8;
  c.features.history_width = 4;
  c.features.din_hidden = 4;
  c.features.scene_width = 3;
  c.features.time_embedding = 2;
  c.head_hidden = 8;
  const auto stats = features::fit_zscore(samples);
  model::Model m = model::make_model(c, stats.widths, seed);
  m.stats = stats;
  return m;
}

}  // namespace scasrec::testing
