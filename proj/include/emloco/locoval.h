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

#ifndef EMLOCO_LOCOVAL_H_
#define EMLOCO_LOCOVAL_H_

// Differentiable plausibility surrogate: an MLP with a sigmoid head,
// regressed onto oracle rewards from canonicalized observation-time cues
// (future trajectory, initial joints, root velocity).

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "emloco/geometry.h"
#include "emloco/gradcore.h"
#include "emloco/oracle.h"

namespace emloco {

struct FeatureLayout {
  int horizon = 12;  // T_f
  int num_joints = kNumJoints;
  bool include_pose = true;
  bool include_velocity = true;

  // 2 * T_f + 3 * J (pose) + 2 (velocity).
  int InputSize() const;
  void Validate() const;

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

// Translation/yaw that maps the observation root to the origin facing +x.
struct CanonicalFrame {
  Vec2 origin = Vec2::Zero();
  double heading = 0.0;

  static CanonicalFrame Of(const ObservableState& obs);
  Vec2 ToLocal(const Vec2& p) const { return Rotate(p - origin, -heading); }
  Vec2 DirectionToLocal(const Vec2& v) const { return Rotate(v, -heading); }
  Vec2 DirectionToWorld(const Vec2& v) const { return Rotate(v, heading); }
};

// Applies the canonical frame to both inputs (root at origin, heading 0).
std::pair<Trajectory, ObservableState> ToCanonical(const Trajectory& future,
                                                   const ObservableState& obs);

// Canonical features: per-step displacements (the first measured from the
// root), then joints relative to the root, then root velocity.
Eigen::VectorXd Canonicalize(const Trajectory& future,
                             const ObservableState& obs,
                             const FeatureLayout& layout);

// Maps d score / d features back onto d score / d (world trajectory points).
std::vector<Vec2> TrajectoryGradient(const FeatureLayout& layout,
                                     const CanonicalFrame& frame,
                                     const Eigen::Ref<const Eigen::VectorXd>&
                                         feature_grad);

struct LocoValModel {
  MlpModel net;
  FeatureLayout layout;
};

LocoValModel CreateLocoVal(const FeatureLayout& layout,
                           const std::vector<int>& hidden, std::uint64_t seed);

struct LocoValOptions {
  FeatureLayout layout;
  std::vector<int> hidden = {128, 128, 128};
  TrainConfig train;
  double holdout_fraction = 0.1;
};

struct LocoValCurvePoint {
  int epoch = 0;
  int step = 0;
  double learning_rate = 0.0;
  double train_mse = 0.0;
  double holdout_mse = 0.0;
};

struct LocoValTrainResult {
  LocoValModel model;  // best held-out checkpoint
  std::vector<LocoValCurvePoint> curve;
  double best_holdout_mse = 0.0;
  int best_step = 0;
  std::size_t n_train = 0;
  std::size_t n_holdout = 0;
  double holdout_pearson = 0.0;  // NaN with fewer than two held-out samples
};

// Minimizes the mean squared error between the surrogate output and the
// oracle reward. The horizon of `options.layout` is taken from the data.
LocoValTrainResult TrainLocoVal(std::span<const PlausibilitySample> dataset,
                                const LocoValOptions& options);

double Score(const LocoValModel& model, const Trajectory& future,
             const ObservableState& obs);
std::vector<double> ScoreBatch(const LocoValModel& model,
                               std::span<const Trajectory> candidates,
                               const ObservableState& obs);

struct ScoreGradient {
  double score = 0.0;
  std::vector<Vec2> d_points;  // d score / d future point
};
ScoreGradient ScoreWithGradient(const LocoValModel& model,
                                const Trajectory& future,
                                const ObservableState& obs);

// Checkpoint: the MLP document plus a feature_layout block.
nlohmann::json ToJson(const LocoValModel& model,
                      const TrainConfig* train_config = nullptr);
LocoValModel LocoValFromJson(const nlohmann::json& j);

// FNV-1a over the parameter bytes and layout, as 16 hex digits.
std::string Checksum(const LocoValModel& model);

}  // namespace emloco

#endif  // EMLOCO_LOCOVAL_H_
