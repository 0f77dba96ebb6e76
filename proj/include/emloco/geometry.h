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

#ifndef EMLOCO_GEOMETRY_H_
#define EMLOCO_GEOMETRY_H_

#include <array>
#include <cstddef>
#include <numbers>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace emloco {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

// Default frame period: 2.5 fps.
inline constexpr double kDefaultDt = 0.4;

// Wraps an angle into (-pi, pi].
double WrapAngle(double angle);

// Counter-clockwise rotation about the origin / the vertical axis.
Vec2 Rotate(const Vec2& v, double angle);
Vec3 RotateYaw(const Vec3& v, double angle);

// Heading of a planar vector; 0 for the zero vector.
double HeadingOf(const Vec2& v);

// Ground-plane positions sampled at a fixed frame period.
struct Trajectory {
  std::vector<Vec2> points;
  double dt = kDefaultDt;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec2& operator[](std::size_t i) const { return points[i]; }
  Vec2& operator[](std::size_t i) { return points[i]; }

  // Throws InputError unless the trajectory has at least `min_length`
  // points, finite coordinates and dt > 0.
  void Validate(std::size_t min_length = 2) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// The named joints every pose must carry, in feature order.
inline constexpr std::array<std::string_view, 8> kJointNames = {
    "head",      "left_shoulder", "right_shoulder", "pelvis",
    "left_knee", "right_knee",    "left_ankle",     "right_ankle"};
inline constexpr int kNumJoints = static_cast<int>(kJointNames.size());

enum JointIndex : int {
  kHead = 0,
  kLeftShoulder,
  kRightShoulder,
  kPelvis,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

// Index of a joint name in kJointNames, or -1.
int JointIndexOf(std::string_view name);

// Joint positions in kJointNames order (meters, z up). Empty for pose-free
// observations.
using JointSet = std::vector<Vec3>;

// Facing direction implied by the shoulder line: a pose facing +x has its
// left shoulder on +y.
double FacingHeading(const JointSet& joints);

// Observation-time subset of the humanoid state: initial joints and root
// velocity. `root` is the ground-plane root position; it equals the pelvis
// projection whenever joints are present.
struct ObservableState {
  JointSet joints;
  Vec2 root_velocity = Vec2::Zero();
  Vec2 root = Vec2::Zero();

  bool has_pose() const { return !joints.empty(); }
  // Facing heading when a pose is present, otherwise the direction of motion.
  double Heading() const;
  void Validate() const;

  friend bool operator==(const ObservableState&,
                         const ObservableState&) = default;
};

// Full initial state consumed by the locomotion oracle.
struct HumanoidState {
  JointSet joints;
  double heading = 0.0;
  Vec2 root_velocity = Vec2::Zero();
  JointSet joint_velocities;

  Vec2 root() const { return joints[kPelvis].head<2>(); }
  ObservableState Observable() const;
  // Throws InputError on missing joints, non-finite values or a heading
  // outside (-pi, pi].
  void Validate() const;

  friend bool operator==(const HumanoidState&, const HumanoidState&) = default;
};

// Rigid ground-plane motion: rotate by `angle` about the origin, then
// translate by `offset`.
struct RigidTransform2 {
  double angle = 0.0;
  Vec2 offset = Vec2::Zero();

  Vec2 Apply(const Vec2& p) const { return Rotate(p, angle) + offset; }
  Trajectory Apply(const Trajectory& t) const;
  HumanoidState Apply(const HumanoidState& s) const;
  ObservableState Apply(const ObservableState& s) const;
};

}  // namespace emloco

#endif  // EMLOCO_GEOMETRY_H_
