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

#ifndef EMLOCO_ORACLE_H_
#define EMLOCO_ORACLE_H_

// Non-differentiable locomotion oracle. A point-mass walker with speed,
// acceleration and turn-rate caps greedily chases each waypoint of a
// candidate trajectory; its discounted, normalized reward is the
// plausibility label the surrogate is regressed onto.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "emloco/geometry.h"

namespace emloco {

struct OracleParams {
  double v_max = 2.5;          // m/s
  double a_max = 2.0;          // m/s^2
  double turn_rate_max = 2.0;  // rad/s
  double gamma = 0.95;
  double w_follow = 1.0;
  double w_energy = 0.25;
  double follow_scale = 0.5;  // m

  // Throws ConfigError when a cap is not positive, gamma is outside (0, 1]
  // or both reward weights vanish.
  void Validate() const;
};

struct WalkerStep {
  Vec2 position;
  Vec2 velocity;
  double heading = 0.0;
  double acceleration = 0.0;  // |dv| / dt
  double reward = 0.0;        // clipped to [0, 1]
};

struct RolloutTrace {
  std::vector<WalkerStep> steps;  // one per waypoint
  double reward = 0.0;            // normalized discounted return
};

// Rolls the walker out from `state` along `future` (waypoints for frames
// 1..T; the walker starts at the state's root). Returns Omega in [0, 1].
double Rollout(const Trajectory& future, const HumanoidState& state,
               const OracleParams& params);
RolloutTrace RolloutWithTrace(const Trajectory& future,
                              const HumanoidState& state,
                              const OracleParams& params);

// Rotates the pose about its pelvis so it faces `heading`, moves the pelvis
// over `root` and sets the root velocity.
HumanoidState AlignPoseTo(const HumanoidState& pose, const Vec2& root,
                          double heading, const Vec2& root_velocity);

enum class PairLabel { kPlausible, kImplausible };
enum class Perturbation { kNone, kHeadingFlip, kSpeedScale, kSharpTurn };

std::string PairLabelName(PairLabel label);
PairLabel ParsePairLabel(const std::string& name);
std::string PerturbationName(Perturbation p);

struct PairDraw {
  Trajectory future;  // T points, frames 1..T
  HumanoidState state;
  Perturbation perturbation = Perturbation::kNone;
};

struct PairStats {
  std::size_t resampled = 0;
};

// Bank trajectories hold T + 1 points: the current position followed by T
// future waypoints. Plausible pairs rotate the bank trajectory so its first
// step points along the pose heading, rescale it so the first-step speed
// equals the pose root speed, and translate it onto the pose root. Draws
// that cannot be velocity-aligned are resampled.
PairDraw SamplePlausiblePair(std::span<const HumanoidState> poses,
                             std::span<const Trajectory> trajectories,
                             std::mt19937_64& rng, PairStats* stats = nullptr);

// Implausible pairs only translate the bank trajectory onto the pose root
// and then apply one random perturbation (or `forced`, when not kNone).
PairDraw SampleImplausiblePair(std::span<const HumanoidState> poses,
                               std::span<const Trajectory> trajectories,
                               std::mt19937_64& rng, const OracleParams& params,
                               Perturbation forced = Perturbation::kNone);

// The pieces of SampleImplausiblePair, exposed for direct testing.
Trajectory TranslateOntoRoot(const Trajectory& bank, const Vec2& root);
Trajectory AlignToPose(const Trajectory& bank, const HumanoidState& pose);
Trajectory ApplyPerturbation(const Trajectory& placed, const HumanoidState& pose,
                             Perturbation kind, const OracleParams& params,
                             std::mt19937_64& rng);

// Drops the leading current-position point of a bank trajectory.
Trajectory FuturePart(const Trajectory& bank);

struct PlausibilitySample {
  Trajectory trajectory;  // future waypoints
  ObservableState observable;
  double heading = 0.0;  // oracle-only initial heading
  double reward = 0.0;
  PairLabel label = PairLabel::kPlausible;
};

// Plausible samples first, then implausible ones; every reward comes from
// Rollout(). Deterministic in `seed`.
std::vector<PlausibilitySample> BuildPlausibilityDataset(
    std::span<const HumanoidState> poses,
    std::span<const Trajectory> trajectories, std::size_t n_plausible,
    std::size_t n_implausible, const OracleParams& params, std::uint64_t seed,
    PairStats* stats = nullptr);

// CSV: label, reward, dt, T_f, x0, y0, ..., heading, root_vx, root_vy,
// joint coordinates (x, y, z per joint in kJointNames order).
void WritePlausibilityCsv(std::ostream& out,
                          std::span<const PlausibilitySample> samples);
std::vector<PlausibilitySample> ReadPlausibilityCsv(std::istream& in);

}  // namespace emloco

#endif  // EMLOCO_ORACLE_H_
