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

#include "scasrec/rewards/rewards.hpp"

#include <algorithm>
#include <string>

#include "scasrec/errors.hpp"

namespace scasrec::rewards {

namespace {

bool unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

double scr(double gt_cr, std::span<const double> list_cr) {
  if (!unit(gt_cr)) throw ContractError("scr: gt_cr outside [0, 1]: " + std::to_string(gt_cr));
  double best = 0.0;
  for (double c : list_cr) {
    if (!unit(c)) throw ContractError("scr: list CR outside [0, 1]: " + std::to_string(c));
    best = std::max(best, c);
  }
  return gt_cr - best;
}

double eor_reward(int t, int t_hat, double alpha) {
  if (t < 1) throw ContractError("eor_reward: t must be >= 1");
  return t == t_hat + 1 ? alpha : 0.0;
}

int build_label(int t, int t_hat, int gt_index, int eor_index) {
  if (t <= t_hat) return gt_index;
  if (t == t_hat + 1) return eor_index;
  throw ContractError("build_label: no label beyond t_hat + 1 (t=" + std::to_string(t) +
                      ", t_hat=" + std::to_string(t_hat) + ")");
}

double combined_reward(double s, double e) { return s + e; }

void AlphaState::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
  if (!unit(beta)) throw ConfigError("beta must be in [0, 1]");
}

AlphaState alpha_update(AlphaState s, double e) {
  if (!unit(e)) throw ContractError("alpha_update: e outside [0, 1]");
  if (e < s.beta) {
    s.alpha += s.eta;
  } else if (e > s.beta) {
    s.alpha = std::max(s.alpha - s.eta, 0.0);
  }
  s.last_e = e;
  return s;
}

std::vector<double> discounted_returns(std::span<const double> r, double lambda) {
  std::vector<double> q(r.size(), 0.0);
  double acc = 0.0;
  for (std::size_t k = r.size(); k-- > 0;) {
    acc = r[k] + lambda * acc;
    q[k] = acc;
  }
  return q;
}

}  // namespace scasrec::rewards
