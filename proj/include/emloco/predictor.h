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

#ifndef EMLOCO_PREDICTOR_H_
#define EMLOCO_PREDICTOR_H_

// Multi-head trajectory predictor: a shared MLP trunk feeding K linear
// heads, each emitting T_f displacements. Trained with MSE (K = 1) or
// min-over-heads MSE (K > 1) plus the plausibility regularizer from a frozen
// surrogate.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "emloco/geometry.h"
#include "emloco/gradcore.h"
#include "emloco/locoval.h"
#include "emloco/metrics.h"

namespace emloco {

struct TrainingInstance {
  Trajectory past;    // T_p points, the last one is the current position
  std::optional<std::vector<JointSet>> past_poses;
  Trajectory future;  // T_f points
  ObservableState observable;
};

struct PredictorLayout {
  int past_length = 9;  // T_p
  int horizon = 12;     // T_f
  bool include_pose = true;
  int num_joints = kNumJoints;

  // 2 (T_p - 1) past displacements + 2 velocity (+ 3 J pose).
  int InputSize() const;
  void Validate() const;

  friend bool operator==(const PredictorLayout&,
                         const PredictorLayout&) = default;
};

struct PredictorModel {
  MlpModel trunk;
  std::vector<MlpModel> heads;
  PredictorLayout layout;

  int num_heads() const { return static_cast<int>(heads.size()); }
};

// Heads get distinct seeds, hence distinct initial weights.
PredictorModel CreatePredictor(const PredictorLayout& layout, int num_heads,
                               const std::vector<int>& trunk_hidden,
                               std::uint64_t seed);

// Network input in the canonical frame of the observation.
Eigen::VectorXd PredictorFeatures(const PredictorLayout& layout,
                                  const Trajectory& past,
                                  const ObservableState& obs);

// Cumulative sums of canonical head displacements rotated back to the world
// frame, anchored at the last observed position.
PredictionSet Predict(const PredictorModel& model, const Trajectory& past,
                      const ObservableState& obs);

double LossMse(const Trajectory& pred, const Trajectory& gt);

struct MinMseResult {
  double loss = 0.0;
  int head = 0;  // lowest index on ties
};
MinMseResult LossMinMse(const PredictionSet& pred, const Trajectory& gt);

enum class EmLocoForm {
  kMseToOne,       // mean_k (score_k - 1)^2
  kNegativeScore,  // -mean_k score_k
};

std::string EmLocoFormName(EmLocoForm form);
EmLocoForm ParseEmLocoForm(const std::string& name);

double LossEmLoco(const LocoValModel& locoval, const PredictionSet& pred,
                  const ObservableState& obs,
                  EmLocoForm form = EmLocoForm::kMseToOne);

// Gradient of LossEmLoco with respect to every predicted point.
std::vector<std::vector<Vec2>> LossEmLocoGradient(
    const LocoValModel& locoval, const PredictionSet& pred,
    const ObservableState& obs, EmLocoForm form = EmLocoForm::kMseToOne);

double LossTotal(double trajectory_loss, double emloco_loss, double alpha);

struct PredictorOptions {
  int num_heads = 1;
  double alpha = 0.0;
  std::vector<int> trunk_hidden = {256, 256};
  bool include_pose = true;
  EmLocoForm form = EmLocoForm::kMseToOne;
  // Training steps, not epochs; one epoch is ceil(N / batch_size) steps.
  TrainConfig train;
  // Drop the trajectory loss entirely (regularizer-only training).
  bool trajectory_loss = true;
};

struct PredictorEpochLog {
  int epoch = 0;
  double trajectory_loss = 0.0;  // L_T
  double emloco_loss = 0.0;      // L_E, NaN without a surrogate
  double ratio = 0.0;            // alpha * L_E / L_T
  bool warning = false;          // alpha * L_E exceeded L_T
};

struct PredictorTrainResult {
  PredictorModel model;
  std::vector<PredictorEpochLog> log;
};

// `locoval` may be null, in which case the regularizer does not exist at all;
// with alpha = 0 the regularizer is evaluated for logging only and never
// touches the gradients. Throws ConfigError when the surrogate layout does
// not match the predictor.
PredictorTrainResult TrainPredictor(std::span<const TrainingInstance> dataset,
                                    const LocoValModel* locoval,
                                    const PredictorOptions& options);

// Checkpoint: trunk and head MLP documents plus
// {K, T_p, T_f, include_pose, alpha, locoval_checksum}.
nlohmann::json ToJson(const PredictorModel& model, double alpha,
                      const std::string& locoval_checksum,
                      const TrainConfig* train_config = nullptr);
PredictorModel PredictorFromJson(const nlohmann::json& j);

}  // namespace emloco

#endif  // EMLOCO_PREDICTOR_H_
