// Copyright 2026 The emloco Authors
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

#ifndef EMLOCO_CONFIG_H_
#define EMLOCO_CONFIG_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "emloco/datakit.h"
#include "emloco/gradcore.h"
#include "emloco/locoval.h"
#include "emloco/oracle.h"
#include "emloco/predictor.h"

namespace emloco {

struct DataConfig {
  std::string trajectories;  // external TSV; empty means synthetic
  SyntheticConfig synthetic;
  int n_tracks = 300;
  int n_poses = 200;
  int past_length = 9;
  int horizon = 12;
  int window_stride = 3;
  int bank_stride = 2;
  double eval_fraction = 0.2;
  int n_plausible = 5000;
  int n_implausible = 5000;
};

struct LocoValConfig {
  std::vector<int> hidden = {128, 128, 128};
  bool include_pose = true;
  double holdout_fraction = 0.1;
  TrainConfig train;
};

struct PredictorConfig {
  int num_heads = 20;
  double alpha = 100.0;
  std::vector<int> trunk_hidden = {256, 256};
  bool include_pose = true;
  EmLocoForm form = EmLocoForm::kMseToOne;
  std::string checkpoint = "predictor.json";
  TrainConfig train;
};

struct EvalConfig {
  double lambda = 0.7;
  int chi2_bins = 50;
  int plausibility_bins = 10;
  std::string prefix = "eval";
  std::vector<double> lambda_grid;
  std::vector<double> alpha_grid;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "run";
  OracleParams oracle;
  DataConfig data;
  LocoValConfig locoval;
  PredictorConfig predictor;
  EvalConfig eval;

  // Output directory with EMLOCO_OUTPUT_ROOT prepended to relative paths.
  std::string ResolvedOutputDir() const;
  std::uint64_t SubSeed(std::string_view stream) const;
  void Validate() const;
};

// Every accepted key with its default value.
nlohmann::json DefaultConfigJson();

// Overlays `overrides` on the defaults. Unknown keys and type mismatches
// raise ConfigError naming the dotted key.
nlohmann::json MergeConfig(const nlohmann::json& base,
                           const nlohmann::json& overrides);

// "a.b.c=value"; the value is parsed as JSON when possible, otherwise taken
// as a string.
void ApplyOverride(nlohmann::json& config, const std::string& assignment);

RunConfig RunConfigFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const RunConfig& config);

// Reads `path` (empty for defaults only), then applies `overrides` in order.
RunConfig LoadRunConfig(const std::string& path,
                        const std::vector<std::string>& overrides = {});

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream);

}  // namespace emloco

#endif  // EMLOCO_CONFIG_H_
