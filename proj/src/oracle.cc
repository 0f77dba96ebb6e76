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

#include "emloco/oracle.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "emloco/error.h"

namespace emloco {
namespace {

constexpr int kMaxResamples = 1000;
constexpr double kStillSpeed = 1e-9;

template <typename T>
const T& Pick(std::span<const T> bank, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  return bank[pick(rng)];
}

void CheckBanks(std::span<const HumanoidState> poses,
                std::span<const Trajectory> trajectories) {
  if (poses.empty()) throw InputError("pose bank is empty");
  if (trajectories.empty()) throw InputError("trajectory bank is empty");
}

std::vector<double> SplitCsvNumbers(const std::string& line, std::size_t lineno,
                                    std::string* label) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  bool first = true;
  while (std::getline(ss, cell, ',')) {
    if (first) {
      *label = cell;
      first = false;
      continue;
    }
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ParseError("non-numeric CSV cell '" + cell + "'", lineno);
    }
  }
  return values;
}

}  // namespace

void OracleParams::Validate() const {
  if (!(v_max > 0.0) || !(a_max > 0.0) || !(turn_rate_max > 0.0)) {
    throw ConfigError("oracle caps must be positive");
  }
  if (!(gamma > 0.0) || gamma > 1.0) {
    throw ConfigError("oracle gamma must lie in (0, 1]");
  }
  if (w_follow < 0.0 || w_energy < 0.0 || !(w_follow + w_energy > 0.0)) {
    throw ConfigError("oracle reward weights must be non-negative, not both 0");
  }
  if (!(follow_scale > 0.0)) throw ConfigError("follow_scale must be positive");
}

RolloutTrace RolloutWithTrace(const Trajectory& future,
                              const HumanoidState& state,
                              const OracleParams& params) {
  params.Validate();
  future.Validate(1);
  state.Validate();
  const double dt = future.dt;
  const double max_dv = params.a_max * dt;
  const double max_turn = params.turn_rate_max * dt;

  Vec2 position = state.root();
  double heading = state.heading;
  Vec2 forward(std::cos(heading), std::sin(heading));
  const double start_speed =
      std::clamp(state.root_velocity.dot(forward), 0.0, params.v_max);
  Vec2 velocity = start_speed * forward;

  RolloutTrace trace;
  trace.steps.reserve(future.size());
  double discount = 1.0;
  double weighted = 0.0;
  double normalizer = 0.0;
  for (const Vec2& target : future.points) {
    Vec2 desired = (target - position) / dt;
    const double desired_speed = desired.norm();
    if (desired_speed > params.v_max) desired *= params.v_max / desired_speed;

    Vec2 dv = desired - velocity;
    const double dv_norm = dv.norm();
    if (dv_norm > max_dv) dv *= max_dv / dv_norm;
    Vec2 next = velocity + dv;

    if (next.norm() > kStillSpeed) {
      const double turn = WrapAngle(std::atan2(next.y(), next.x()) - heading);
      if (std::abs(turn) > max_turn) {
        const double capped = heading + std::copysign(max_turn, turn);
        const Vec2 dir(std::cos(capped), std::sin(capped));
        next = std::max(0.0, next.dot(dir)) * dir;
        const Vec2 change = next - velocity;
        if (change.norm() > max_dv) {
          next = velocity + change * (max_dv / change.norm());
        }
      }
    }
    if (next.norm() > kStillSpeed) {
      heading = std::atan2(next.y(), next.x());
    }

    WalkerStep step;
    step.acceleration = (next - velocity).norm() / dt;
    velocity = next;
    position += velocity * dt;
    const double err2 = (position - target).squaredNorm();
    const double ratio = step.acceleration / params.a_max;
    step.reward = std::clamp(
        params.w_follow *
                std::exp(-err2 / (params.follow_scale * params.follow_scale)) -
            params.w_energy * ratio * ratio,
        0.0, 1.0);
    step.position = position;
    step.velocity = velocity;
    step.heading = heading;
    weighted += discount * step.reward;
    normalizer += discount;
    discount *= params.gamma;
    trace.steps.push_back(step);
  }
  trace.reward = std::clamp(weighted / normalizer, 0.0, 1.0);
  return trace;
}

double Rollout(const Trajectory& future, const HumanoidState& state,
               const OracleParams& params) {
  return RolloutWithTrace(future, state, params).reward;
}

HumanoidState AlignPoseTo(const HumanoidState& pose, const Vec2& root,
                          double heading, const Vec2& root_velocity) {
  const double turn = heading - pose.heading;
  const Vec2 pivot = pose.root();
  HumanoidState out = pose;
  for (Vec3& j : out.joints) {
    Vec3 local = j;
    local.head<2>() -= pivot;
    local = RotateYaw(local, turn);
    local.head<2>() += root;
    j = local;
  }
  for (Vec3& v : out.joint_velocities) v = RotateYaw(v, turn);
  out.heading = WrapAngle(heading);
  out.root_velocity = root_velocity;
  return out;
}

std::string PairLabelName(PairLabel label) {
  return label == PairLabel::kPlausible ? "plausible_pair" : "implausible_pair";
}

PairLabel ParsePairLabel(const std::string& name) {
  if (name == "plausible_pair") return PairLabel::kPlausible;
  if (name == "implausible_pair") return PairLabel::kImplausible;
  throw InputError("unknown pair label '" + name + "'");
}

std::string PerturbationName(Perturbation p) {
  switch (p) {
    case Perturbation::kNone: return "none";
    case Perturbation::kHeadingFlip: return "heading_flip";
    case Perturbation::kSpeedScale: return "speed_scale";
    case Perturbation::kSharpTurn: return "sharp_turn";
  }
  return "none";
}

Trajectory FuturePart(const Trajectory& bank) {
  if (bank.size() < 2) {
    throw InputError("bank trajectories need a start point and a future");
  }
  return {{bank.points.begin() + 1, bank.points.end()}, bank.dt};
}

Trajectory TranslateOntoRoot(const Trajectory& bank, const Vec2& root) {
  Trajectory out = bank;
  const Vec2 shift = root - bank[0];
  for (Vec2& p : out.points) p += shift;
  return out;
}

Trajectory AlignToPose(const Trajectory& bank, const HumanoidState& pose) {
  bank.Validate(2);
  const Vec2 origin = bank[0];
  const Vec2 first = bank[1] - origin;
  const double first_speed = first.norm() / bank.dt;
  const double pose_speed = pose.root_velocity.norm();
  double turn = 0.0;
  double scale = 1.0;
  if (first_speed > kStillSpeed && pose_speed > kStillSpeed) {
    turn = pose.heading - HeadingOf(first);
    scale = pose_speed / first_speed;
  } else if (first_speed > kStillSpeed || pose_speed > kStillSpeed) {
    throw InputError("cannot velocity-align a still pose with a moving path");
  }
  Trajectory out{{}, bank.dt};
  out.points.reserve(bank.size());
  const Vec2 root = pose.root();
  for (const Vec2& p : bank.points) {
    out.points.push_back(root + scale * Rotate(p - origin, turn));
  }
  return out;
}

Trajectory ApplyPerturbation(const Trajectory& placed, const HumanoidState& pose,
                             Perturbation kind, const OracleParams& params,
                             std::mt19937_64& rng) {
  const Vec2 origin = placed[0];
  Trajectory out = placed;
  switch (kind) {
    case Perturbation::kNone:
      break;
    case Perturbation::kHeadingFlip: {
      const double turn =
          pose.heading + kPi - HeadingOf(placed[1] - placed[0]);
      for (Vec2& p : out.points) p = origin + Rotate(p - origin, turn);
      break;
    }
    case Perturbation::kSpeedScale: {
      const double factor = std::uniform_real_distribution<double>(2.0, 4.0)(rng);
      for (Vec2& p : out.points) p = origin + factor * (p - origin);
      break;
    }
    case Perturbation::kSharpTurn: {
      const std::size_t steps = placed.size() - 1;
      const std::size_t start =
          std::uniform_int_distribution<std::size_t>(0, steps - 1)(rng);
      const double magnitude =
          params.turn_rate_max * placed.dt *
          std::uniform_real_distribution<double>(1.0, 2.0)(rng);
      std::bernoulli_distribution coin(0.5);
      const bool zigzag = coin(rng);
      double sign = coin(rng) ? 1.0 : -1.0;
      double turn = 0.0;
      for (std::size_t i = start; i < steps; ++i) {
        if (zigzag && i > start && coin(rng)) sign = -sign;
        turn += sign * magnitude;
        const Vec2 step = placed[i + 1] - placed[i];
        out[i + 1] = out[i] + Rotate(step, turn);
      }
      break;
    }
  }
  return out;
}

PairDraw SamplePlausiblePair(std::span<const HumanoidState> poses,
                             std::span<const Trajectory> trajectories,
                             std::mt19937_64& rng, PairStats* stats) {
  CheckBanks(poses, trajectories);
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    const HumanoidState& pose = Pick(poses, rng);
    const Trajectory& bank = Pick(trajectories, rng);
    try {
      return {FuturePart(AlignToPose(bank, pose)), pose, Perturbation::kNone};
    } catch (const InputError&) {
      if (stats != nullptr) ++stats->resampled;
    }
  }
  throw InputError("no velocity-alignable pose/trajectory pair found");
}

PairDraw SampleImplausiblePair(std::span<const HumanoidState> poses,
                               std::span<const Trajectory> trajectories,
                               std::mt19937_64& rng, const OracleParams& params,
                               Perturbation forced) {
  CheckBanks(poses, trajectories);
  const HumanoidState& pose = Pick(poses, rng);
  const Trajectory& bank = Pick(trajectories, rng);
  bank.Validate(2);
  Perturbation kind = forced;
  if (kind == Perturbation::kNone) {
    kind = static_cast<Perturbation>(
        std::uniform_int_distribution<int>(1, 3)(rng));
  }
  const Trajectory placed = TranslateOntoRoot(bank, pose.root());
  return {FuturePart(ApplyPerturbation(placed, pose, kind, params, rng)), pose,
          kind};
}

std::vector<PlausibilitySample> BuildPlausibilityDataset(
    std::span<const HumanoidState> poses,
    std::span<const Trajectory> trajectories, std::size_t n_plausible,
    std::size_t n_implausible, const OracleParams& params, std::uint64_t seed,
    PairStats* stats) {
  CheckBanks(poses, trajectories);
  params.Validate();
  std::mt19937_64 rng(seed);
  std::vector<PlausibilitySample> samples;
  samples.reserve(n_plausible + n_implausible);
  auto add = [&](const PairDraw& draw, PairLabel label) {
    samples.push_back({draw.future, draw.state.Observable(), draw.state.heading,
                       Rollout(draw.future, draw.state, params), label});
  };
  for (std::size_t i = 0; i < n_plausible; ++i) {
    add(SamplePlausiblePair(poses, trajectories, rng, stats),
        PairLabel::kPlausible);
  }
  for (std::size_t i = 0; i < n_implausible; ++i) {
    add(SampleImplausiblePair(poses, trajectories, rng, params),
        PairLabel::kImplausible);
  }
  return samples;
}

void WritePlausibilityCsv(std::ostream& out,
                          std::span<const PlausibilitySample> samples) {
  const std::size_t horizon = samples.empty() ? 0 : samples[0].trajectory.size();
  out << "label,reward,dt,T_f";
  for (std::size_t t = 0; t < horizon; ++t) out << ",x" << t << ",y" << t;
  out << ",heading,root_vx,root_vy";
  for (const auto name : kJointNames) {
    out << ',' << name << "_x," << name << "_y," << name << "_z";
  }
  out << '\n';
  out << std::setprecision(17);
  for (const PlausibilitySample& s : samples) {
    if (s.trajectory.size() != horizon || !s.observable.has_pose()) {
      throw InputError("plausibility samples must share T_f and carry poses");
    }
    out << PairLabelName(s.label) << ',' << s.reward << ',' << s.trajectory.dt
        << ',' << horizon;
    for (const Vec2& p : s.trajectory.points) out << ',' << p.x() << ',' << p.y();
    out << ',' << s.heading << ',' << s.observable.root_velocity.x() << ','
        << s.observable.root_velocity.y();
    for (const Vec3& j : s.observable.joints) {
      out << ',' << j.x() << ',' << j.y() << ',' << j.z();
    }
    out << '\n';
  }
}

std::vector<PlausibilitySample> ReadPlausibilityCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (line.rfind("label,reward,dt,T_f", 0) != 0) {
    throw ParseError("missing plausibility CSV header", 1);
  }
  std::vector<PlausibilitySample> samples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string label;
    const std::vector<double> v = SplitCsvNumbers(line, lineno, &label);
    if (v.size() < 3) throw ParseError("truncated CSV row", lineno);
    const double horizon = v[2];
    if (horizon < 1 || horizon != std::floor(horizon)) {
      throw ParseError("invalid T_f", lineno);
    }
    const auto t_f = static_cast<std::size_t>(horizon);
    if (v.size() != 3 + 2 * t_f + 3 + 3 * kNumJoints) {
      throw ParseError("row has " + std::to_string(v.size() + 1) +
                           " columns, expected " +
                           std::to_string(4 + 2 * t_f + 3 + 3 * kNumJoints),
                       lineno);
    }
    PlausibilitySample s;
    try {
      s.label = ParsePairLabel(label);
    } catch (const InputError& e) {
      throw ParseError(e.what(), lineno);
    }
    s.reward = v[0];
    s.trajectory.dt = v[1];
    std::size_t k = 3;
    for (std::size_t t = 0; t < t_f; ++t, k += 2) {
      s.trajectory.points.emplace_back(v[k], v[k + 1]);
    }
    s.heading = v[k++];
    s.observable.root_velocity = Vec2(v[k], v[k + 1]);
    k += 2;
    for (int j = 0; j < kNumJoints; ++j, k += 3) {
      s.observable.joints.emplace_back(v[k], v[k + 1], v[k + 2]);
    }
    s.observable.root = s.observable.joints[kPelvis].head<2>();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace emloco
