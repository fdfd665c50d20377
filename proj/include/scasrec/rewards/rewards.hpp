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

namespace scasrec::rewards {

/// Remaining coverage gap: gt_cr minus the best CR already in the list (0 if empty).
double scr(double gt_cr, std::span<const double> list_cr);

/// alpha at the step right after the ground truth entered the list, else 0.
double eor_reward(int t, int t_hat, double alpha);

/// Supervision target at step t: the ground truth up to t_hat, EOR at t_hat + 1.
int build_label(int t, int t_hat, int gt_index, int eor_index);

double combined_reward(double scr, double eor);

struct AlphaState {
  double alpha = 0.1;
  double eta = 1e-4;
  double beta = 0.04;
  double last_e = 0.0;

  void validate() const;
};

/// Moves alpha by eta toward making the failure rate e match beta; clamped at 0.
AlphaState alpha_update(AlphaState state, double e);

struct RewardTrace {
  std::vector<double> scr;
  std::vector<double> eor;
  std::vector<double> combined;
  std::vector<int> labels;

  void push(double s, double e, int label) {
    scr.push_back(s);
    eor.push_back(e);
    combined.push_back(combined_reward(s, e));
    labels.push_back(label);
  }
  std::size_t size() const noexcept { return labels.size(); }
};

/// Discounted returns Q_t = sum_{k >= t} lambda^(k - t) r_k.
std::vector<double> discounted_returns(std::span<const double> rewards, double lambda);

}  // namespace scasrec::rewards
