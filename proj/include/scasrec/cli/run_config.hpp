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

#include "scasrec/trainer/trainer.hpp"

namespace scasrec::cli {

/// Everything a train/eval/ablate invocation needs. Precedence is
/// flags > config file > SCASREC_SEED > built-in defaults.
struct RunConfig {
  trainer::TrainConfig train;
  std::string train_data;
  std::string eval_data;
  std::string out;
  std::vector<std::string> methods = {"scasrec", "dnn", "mmr", "dpp"};
  std::vector<int> ks = {1, 2, 3, 4, 5};
  double mmr_lambda = 0.7;
  bool truncate_to_model_len = false;
  std::size_t dnn_epochs = 2;
  std::size_t dnn_hidden = 32;
  std::vector<double> beta_grid = {0.02, 0.04, 0.08};

  void validate() const;
};

/// Defaults with the seed taken from SCASREC_SEED when set.
RunConfig default_run_config();

/// Overlays the keys of a JSON object. Unknown keys and ill-typed values
/// raise ConfigError naming the key.
void apply_json(RunConfig& config, const std::string& json_text);
void apply_json_file(RunConfig& config, const std::string& path);

/// Effective configuration as one-line JSON, keys sorted.
std::string to_json(const RunConfig& config);

/// Comma-separated list helpers for flags such as --k 1,2,3.
std::vector<int> parse_int_list(const std::string& text);
std::vector<std::string> parse_name_list(const std::string& text);

}  // namespace scasrec::cli
