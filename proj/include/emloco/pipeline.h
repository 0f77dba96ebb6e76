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

#ifndef EMLOCO_PIPELINE_H_
#define EMLOCO_PIPELINE_H_

// The two training stages plus evaluation, filtering and sweeps. Every
// command reads and writes files under RunConfig::ResolvedOutputDir() and
// echoes the resolved config there.

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emloco/config.h"
#include "emloco/datakit.h"
#include "emloco/filter.h"
#include "emloco/metrics.h"
#include "emloco/predictor.h"

namespace emloco {

inline constexpr char kTrajectoriesFile[] = "trajectories.tsv";
inline constexpr char kPoseBankFile[] = "pose_bank.json";
inline constexpr char kPlausibilityFile[] = "plausibility.csv";
inline constexpr char kLocoValFile[] = "locoval.json";
inline constexpr char kLocoValCurveFile[] = "locoval_curve.csv";
inline constexpr char kResolvedConfigFile[] = "resolved_config.json";
inline constexpr char kFilterReportFile[] = "filter_report.json";

struct SplitInstances {
  std::vector<TrainingInstance> train;
  std::vector<TrainingInstance> eval;
  std::size_t train_tracks = 0;
  std::size_t eval_tracks = 0;
};

// Seeded track-level split of a dataset, then windowing of each side.
SplitInstances MakeSplit(const RunConfig& config,
                         const TrajectoryDataset& dataset,
                         std::span<const HumanoidState> poses);

// Reads the generated trajectories and pose bank back and splits them.
SplitInstances LoadSplit(const RunConfig& config);

struct GenDataSummary {
  std::size_t n_tracks = 0;
  std::size_t n_bank = 0;
  std::size_t n_poses = 0;
  std::size_t n_plausible = 0;
  std::size_t n_implausible = 0;
  double mean_plausible = 0.0;
  double mean_implausible = 0.0;
  std::size_t resampled = 0;
};
GenDataSummary RunGenData(const RunConfig& config, std::ostream& log);

struct LocoValSummary {
  double holdout_pearson = 0.0;
  double best_holdout_mse = 0.0;
  int best_step = 0;
  std::string checksum;
};
LocoValSummary RunTrainLocoVal(const RunConfig& config, std::ostream& log);

struct PredictorSummary {
  double trajectory_loss = 0.0;  // last epoch
  double emloco_loss = 0.0;
  int warnings = 0;
};
PredictorSummary RunTrainPredictor(const RunConfig& config, std::ostream& log);

struct FilterSummary {
  double lambda = 0.0;
  MetricsReport kept;
  std::optional<MetricsReport> rejected;
  double rejection_rate = 0.0;
  std::size_t fallback_cases = 0;
};

struct EvalSummary {
  MetricsReport all;
  std::vector<PlausibilityBin> bins;
  double bin_trend = 0.0;
  double mean_score = 0.0;
  std::optional<FilterSummary> filter;
};
EvalSummary RunEval(const RunConfig& config, std::optional<double> lambda,
                    std::ostream& log);

// Candidates: "case_id head step x y" rows. Observations: "case_id root_x
// root_y vx vy" optionally followed by x y z for every required joint.
struct FilterCase {
  std::string case_id;
  PredictionSet candidates;
  ObservableState observable;
};
std::vector<FilterCase> ReadFilterCases(const std::string& candidates_path,
                                        const std::string& observations_path,
                                        double dt);

nlohmann::json RunFilter(const RunConfig& config,
                         const std::string& candidates_path,
                         const std::string& observations_path,
                         std::optional<double> lambda, std::ostream& log);

enum class SweepKind { kLambda, kAlpha };
SweepKind ParseSweepKind(const std::string& name);
nlohmann::json RunSweep(const RunConfig& config, SweepKind kind,
                        std::ostream& log);

}  // namespace emloco

#endif  // EMLOCO_PIPELINE_H_
