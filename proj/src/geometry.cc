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

#include "emloco/geometry.h"

#include <cmath>
#include <string>

#include "emloco/error.h"

namespace emloco {

double WrapAngle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Vec2 Rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

Vec3 RotateYaw(const Vec3& v, double angle) {
  const Vec2 xy = Rotate(v.head<2>(), angle);
  return {xy.x(), xy.y(), v.z()};
}

double HeadingOf(const Vec2& v) {
  if (v.x() == 0.0 && v.y() == 0.0) return 0.0;
  return std::atan2(v.y(), v.x());
}

void Trajectory::Validate(std::size_t min_length) const {
  if (points.size() < min_length) {
    throw InputError("trajectory needs at least " + std::to_string(min_length) +
                     " points, got " + std::to_string(points.size()));
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw InputError("trajectory dt must be positive and finite");
  }
  for (const Vec2& p : points) {
    if (!p.allFinite()) throw InputError("trajectory has non-finite points");
  }
}

int JointIndexOf(std::string_view name) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (kJointNames[i] == name) return i;
  }
  return -1;
}

double FacingHeading(const JointSet& joints) {
  const Vec3 across = joints[kLeftShoulder] - joints[kRightShoulder];
  return HeadingOf(Vec2(across.y(), -across.x()));
}

double ObservableState::Heading() const {
  return has_pose() ? FacingHeading(joints) : HeadingOf(root_velocity);
}

void ObservableState::Validate() const {
  if (!joints.empty() && joints.size() != static_cast<std::size_t>(kNumJoints)) {
    throw InputError("observable pose must carry " +
                     std::to_string(kNumJoints) + " joints");
  }
  for (const Vec3& j : joints) {
    if (!j.allFinite()) throw InputError("observable pose is not finite");
  }
  if (!root_velocity.allFinite() || !root.allFinite()) {
    throw InputError("observable root is not finite");
  }
}

ObservableState HumanoidState::Observable() const {
  return {joints, root_velocity, root()};
}

void HumanoidState::Validate() const {
  if (joints.size() != static_cast<std::size_t>(kNumJoints)) {
    throw InputError("humanoid state must carry " +
                     std::to_string(kNumJoints) + " joints");
  }
  if (!joint_velocities.empty() && joint_velocities.size() != joints.size()) {
    throw InputError("joint velocity count does not match joint count");
  }
  for (const Vec3& j : joints) {
    if (!j.allFinite()) throw InputError("humanoid joints are not finite");
  }
  for (const Vec3& j : joint_velocities) {
    if (!j.allFinite()) throw InputError("joint velocities are not finite");
  }
  if (!std::isfinite(heading) || heading <= -kPi || heading > kPi) {
    throw InputError("humanoid heading must lie in (-pi, pi]");
  }
  if (!root_velocity.allFinite()) {
    throw InputError("root velocity is not finite");
  }
}

Trajectory RigidTransform2::Apply(const Trajectory& t) const {
  Trajectory out{{}, t.dt};
  out.points.reserve(t.size());
  for (const Vec2& p : t.points) out.points.push_back(Apply(p));
  return out;
}

HumanoidState RigidTransform2::Apply(const HumanoidState& s) const {
  HumanoidState out = s;
  for (Vec3& j : out.joints) {
    j = RotateYaw(j, angle);
    j.head<2>() += offset;
  }
  for (Vec3& v : out.joint_velocities) v = RotateYaw(v, angle);
  out.heading = WrapAngle(s.heading + angle);
  out.root_velocity = Rotate(s.root_velocity, angle);
  return out;
}

ObservableState RigidTransform2::Apply(const ObservableState& s) const {
  ObservableState out = s;
  for (Vec3& j : out.joints) {
    j = RotateYaw(j, angle);
    j.head<2>() += offset;
  }
  out.root_velocity = Rotate(s.root_velocity, angle);
  out.root = Apply(s.root);
  return out;
}

}  // namespace emloco
