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

#ifndef EMLOCO_DATAKIT_H_
#define EMLOCO_DATAKIT_H_

// Trajectory and pose data: TSV tracks, synthetic scenario generation, the
// pose bank, pose-quality filters and sliding-window training instances.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emloco/geometry.h"
#include "emloco/oracle.h"
#include "emloco/predictor.h"

namespace emloco {

struct Track {
  int ped_id = 0;
  int first_frame = 0;
  int frame_step = 1;
  Trajectory trajectory;
};

// Tracks are ordered by (ped_id, first_frame). A pedestrian whose frames
// skip a step is split into several tracks.
struct TrajectoryDataset {
  std::vector<Track> tracks;
  double dt = kDefaultDt;
  std::string source;
};

// Whitespace-separated "frame ped_id x y" rows. The frame step is the
// smallest positive frame difference seen within any pedestrian.
TrajectoryDataset ParseTsv(std::istream& in, double dt,
                           const std::string& source = "");
TrajectoryDataset LoadTsv(const std::string& path, double dt = kDefaultDt);
void WriteTsv(std::ostream& out, const TrajectoryDataset& dataset);
void SaveTsv(const std::string& path, const TrajectoryDataset& dataset);

struct ScenarioMix {
  double straight = 1.0;
  double speed_change = 1.0;
  double turn = 1.0;
  double stop_and_go = 1.0;
};

struct SyntheticConfig {
  ScenarioMix mix;
  int track_length = 30;
  double dt = kDefaultDt;
  double speed_min = 0.6;  // m/s
  double speed_max = 1.8;
  double accel_max = 0.6;  // m/s^2 for speed changes and stops
  double curvature_min = 0.05;  // 1/m
  double curvature_max = 0.6;
  double noise_sigma = 0.02;  // m
  double min_reward = 0.7;    // oracle feasibility gate

  // Throws ConfigError on inconsistent ranges, and when the largest
  // curvature at the largest speed would exceed the oracle turn-rate cap.
  void Validate(const OracleParams& oracle) const;
};

// Every emitted track is resampled until the oracle rates it at least
// `min_reward` when started from its own first step.
TrajectoryDataset GenerateSynthetic(const SyntheticConfig& config,
                                    std::size_t n_tracks, std::uint64_t seed,
                                    const OracleParams& oracle = {});

// Oracle start state for a track: a walking pose on its first point moving
// with its first displacement.
HumanoidState StartStateFor(const Trajectory& track);

// Parametric walking pose facing `heading` with its pelvis over `root`. The
// stride length and forward lean grow with speed.
HumanoidState GenerateWalkingPose(double heading, double speed, double phase,
                                  const Vec2& root);

struct PoseBankEntry {
  std::string name;
  HumanoidState state;
};

std::vector<PoseBankEntry> GeneratePoseBank(std::size_t n, std::uint64_t seed,
                                            double speed_min = 0.6,
                                            double speed_max = 1.8);
std::vector<HumanoidState> States(std::span<const PoseBankEntry> bank);

// JSON list of {name, joints: {joint_name: [x, y, z]}, heading, speed}.
// Extra joint names are ignored; missing required ones are an error.
nlohmann::json PoseBankToJson(std::span<const PoseBankEntry> bank);
std::vector<PoseBankEntry> PoseBankFromJson(const nlohmann::json& j);

// Bank trajectories of T_f + 1 points cut from the dataset tracks.
std::vector<Trajectory> TrajectoryBank(const TrajectoryDataset& dataset,
                                       int horizon, int stride);

struct PoseFrame {
  double timestamp = 0.0;
  JointSet joints;
};

struct PoseSequence {
  std::vector<PoseFrame> frames;

  // Throws InputError on missing joints or non-increasing timestamps.
  void Validate() const;
};

// Indices into the input sequence, each list in input order.
struct FramePartition {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> rejected;
};

bool PoseIsUpright(const JointSet& joints);
FramePartition PoseRuleFilter(const PoseSequence& seq);

inline constexpr int kDefaultConsistencyWindow = 9;
inline constexpr double kConsistencyZ = 2.0;

// Per joint, distance of each frame from the centered moving average
// (odd-reflected at both ends, so straight-line drift leaves no residual);
// frames where any joint's z-scored distance exceeds 2 are rejected.
FramePartition PoseConsistencyFilter(
    const PoseSequence& seq, int window = kDefaultConsistencyWindow);

struct PoseFilterReport {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> rejected_rule;
  std::vector<std::size_t> rejected_consistency;
};

// Rule-based filter first, then the consistency filter on the survivors.
PoseFilterReport FilterPoseSequence(const PoseSequence& seq,
                                    int window = kDefaultConsistencyWindow);

struct InstanceStats {
  std::size_t windows = 0;
  std::size_t skipped_tracks = 0;
};

// Sliding windows of T_p past and T_f future frames. Each window gets a bank
// pose of similar speed, turned to the last past heading, placed on the
// last past point, moving with the last past displacement / dt.
std::vector<TrainingInstance> MakeTrainingInstances(
    const TrajectoryDataset& dataset, std::span<const HumanoidState> pose_bank,
    int past_length, int horizon, int stride, std::uint64_t seed,
    InstanceStats* stats = nullptr);

}  // namespace emloco

#endif  // EMLOCO_DATAKIT_H_
