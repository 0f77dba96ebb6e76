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

// Command-line entry point: emloco <subcommand> [options].

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emloco/config.h"
#include "emloco/error.h"
#include "emloco/pipeline.h"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void AddCommon(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("-c,--config", common.config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides,
                  "Override a config value, e.g. predictor.alpha=0")
      ->take_all();
  cmd->add_option("-o,--output-dir", common.output_dir,
                  "Output directory (relative paths sit under "
                  "$EMLOCO_OUTPUT_ROOT)");
}

emloco::RunConfig Resolve(const CommonOptions& common) {
  std::vector<std::string> overrides = common.overrides;
  if (!common.output_dir.empty()) {
    overrides.push_back("output_dir=" + nlohmann::json(common.output_dir).dump());
  }
  return emloco::LoadRunConfig(common.config_path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emloco: locomotion-plausibility regularized trajectory "
               "prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "emloco 0.1.0");

  CommonOptions common;
  std::optional<double> filter_lambda;
  std::string candidates;
  std::string observations;
  std::string grid = "lambda";

  CLI::App* gen = app.add_subcommand(
      "gen-data", "Generate trajectories, the pose bank and oracle labels");
  CLI::App* train_lv = app.add_subcommand(
      "train-locoval", "Train the plausibility surrogate on oracle labels");
  CLI::App* train_pred = app.add_subcommand(
      "train-predictor", "Train the multi-head predictor");
  CLI::App* eval = app.add_subcommand(
      "eval", "Evaluate the predictor on the held-out tracks");
  CLI::App* filter = app.add_subcommand(
      "filter", "Score and partition externally produced candidates");
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Sweep the filter threshold or the regularizer weight");
  for (CLI::App* cmd : {gen, train_lv, train_pred, eval, filter, sweep}) {
    AddCommon(cmd, common);
  }
  eval->add_option("--filter", filter_lambda,
                   "Apply the surrogate filter at this threshold")
      ->check(CLI::Range(0.0, 1.0));
  filter->add_option("--candidates", candidates,
                     "Rows of 'case_id head step x y'")
      ->required()
      ->check(CLI::ExistingFile);
  filter->add_option("--observations", observations,
                     "Rows of 'case_id root_x root_y vx vy [joints x y z]'")
      ->required()
      ->check(CLI::ExistingFile);
  filter->add_option("--lambda", filter_lambda,
                     "Threshold (default eval.lambda)")
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--grid", grid, "lambda or alpha")
      ->check(CLI::IsMember({"lambda", "alpha"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    const emloco::RunConfig config = Resolve(common);
    if (gen->parsed()) {
      emloco::RunGenData(config, std::cout);
    } else if (train_lv->parsed()) {
      emloco::RunTrainLocoVal(config, std::cout);
    } else if (train_pred->parsed()) {
      emloco::RunTrainPredictor(config, std::cout);
    } else if (eval->parsed()) {
      emloco::RunEval(config, filter_lambda, std::cout);
    } else if (filter->parsed()) {
      emloco::RunFilter(config, candidates, observations, filter_lambda,
                        std::cout);
    } else if (sweep->parsed()) {
      emloco::RunSweep(config, emloco::ParseSweepKind(grid), std::cout);
    }
  } catch (const emloco::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const emloco::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const emloco::InputError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const emloco::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const emloco::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
