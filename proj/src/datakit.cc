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

#include "emloco/datakit.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "emloco/error.h"

namespace emloco {
namespace {

constexpr int kMaxTrackAttempts = 200;
constexpr double kSpeedMatch = 0.3;  // m/s
constexpr double kMinZScale = 1e-6;  // m

struct Row {
  int frame;
  double x;
  double y;
  std::size_t line;
};

enum class Template { kStraight, kSpeedChange, kTurn, kStopAndGo };

// Speeds per step for a template; headings per step for turns.
Trajectory SynthesizeTrack(Template kind, const SyntheticConfig& c,
                           std::mt19937_64& rng) {
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const int steps = c.track_length - 1;
  std::vector<double> speed(steps);
  std::vector<double> turn_rate(steps, 0.0);
  const double v = uniform(c.speed_min, c.speed_max);
  switch (kind) {
    case Template::kStraight:
      std::fill(speed.begin(), speed.end(), v);
      break;
    case Template::kSpeedChange: {
      const double duration = steps * c.dt;
      const double reach = c.accel_max * duration;
      const double target = std::clamp(uniform(c.speed_min, c.speed_max),
                                       v - reach, v + reach);
      for (int t = 0; t < steps; ++t) {
        speed[t] = v + (target - v) * (t + 1) / steps;
      }
      break;
    }
    case Template::kTurn: {
      const double curvature = uniform(c.curvature_min, c.curvature_max) *
                               (std::bernoulli_distribution(0.5)(rng) ? 1 : -1);
      const int start = std::uniform_int_distribution<int>(0, steps / 2)(rng);
      std::fill(speed.begin(), speed.end(), v);
      for (int t = start; t < steps; ++t) turn_rate[t] = v * curvature;
      break;
    }
    case Template::kStopAndGo: {
      const int pause = std::uniform_int_distribution<int>(2, 5)(rng);
      const int brake_at = std::uniform_int_distribution<int>(0, steps / 3)(rng);
      double s = v;
      int paused = 0;
      bool stopping = true;
      for (int t = 0; t < steps; ++t) {
        if (t >= brake_at && stopping) {
          s = std::max(0.0, s - c.accel_max * c.dt);
          if (s == 0.0 && ++paused > pause) stopping = false;
        } else if (!stopping) {
          s = std::min(v, s + c.accel_max * c.dt);
        }
        speed[t] = s;
      }
      break;
    }
  }

  Trajectory traj{{}, c.dt};
  Vec2 p(uniform(-10.0, 10.0), uniform(-10.0, 10.0));
  double heading = uniform(-kPi, kPi);
  traj.points.push_back(p);
  for (int t = 0; t < steps; ++t) {
    heading += turn_rate[t] * c.dt;
    p += speed[t] * c.dt * Vec2(std::cos(heading), std::sin(heading));
    traj.points.push_back(p);
  }
  if (c.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, c.noise_sigma);
    for (Vec2& q : traj.points) {
      q.x() += noise(rng);
      q.y() += noise(rng);
    }
  }
  return traj;
}

void CheckZ(const JointSet& joints) {
  if (joints.size() != static_cast<std::size_t>(kNumJoints)) {
    throw InputError("pose is missing required joints");
  }
}

}  // namespace

TrajectoryDataset ParseTsv(std::istream& in, double dt,
                           const std::string& source) {
  std::map<int, std::vector<Row>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (ss >> cell) cells.push_back(cell);
    if (cells.empty()) continue;
    if (cells.size() != 4) {
      throw ParseError("expected 4 columns (frame ped_id x y), got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    double values[4];
    for (int i = 0; i < 4; ++i) {
      try {
        std::size_t used = 0;
        values[i] = std::stod(cells[i], &used);
        if (used != cells[i].size() || !std::isfinite(values[i])) {
          throw std::invalid_argument(cells[i]);
        }
      } catch (const std::exception&) {
        throw ParseError("non-numeric value '" + cells[i] + "'", lineno);
      }
    }
    if (values[0] != std::floor(values[0]) || values[1] != std::floor(values[1])) {
      throw ParseError("frame and ped_id must be integers", lineno);
    }
    rows[static_cast<int>(values[1])].push_back(
        {static_cast<int>(values[0]), values[2], values[3], lineno});
  }

  int step = 0;
  for (auto& [ped, list] : rows) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Row& a, const Row& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < list.size(); ++i) {
      const int diff = list[i].frame - list[i - 1].frame;
      if (diff == 0) {
        throw ParseError("duplicate frame " + std::to_string(list[i].frame) +
                             " for pedestrian " + std::to_string(ped),
                         list[i].line);
      }
      if (step == 0 || diff < step) step = diff;
    }
  }
  if (step == 0) step = 1;

  TrajectoryDataset ds;
  ds.dt = dt;
  ds.source = source;
  for (const auto& [ped, list] : rows) {
    Track current{ped, 0, step, {{}, dt}};
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i > 0 && list[i].frame - list[i - 1].frame > step) {
        ds.tracks.push_back(std::move(current));
        current = Track{ped, 0, step, {{}, dt}};
      }
      if (current.trajectory.empty()) current.first_frame = list[i].frame;
      current.trajectory.points.emplace_back(list[i].x, list[i].y);
    }
    if (!current.trajectory.empty()) ds.tracks.push_back(std::move(current));
  }
  return ds;
}

TrajectoryDataset LoadTsv(const std::string& path, double dt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return ParseTsv(in, dt, path);
}

void WriteTsv(std::ostream& out, const TrajectoryDataset& dataset) {
  out << std::setprecision(17);
  for (const Track& t : dataset.tracks) {
    for (std::size_t i = 0; i < t.trajectory.size(); ++i) {
      out << t.first_frame + static_cast<int>(i) * t.frame_step << '\t'
          << t.ped_id << '\t' << t.trajectory[i].x() << '\t'
          << t.trajectory[i].y() << '\n';
    }
  }
}

void SaveTsv(const std::string& path, const TrajectoryDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  WriteTsv(out, dataset);
  if (!out) throw IoError("failed writing '" + path + "'");
}

void SyntheticConfig::Validate(const OracleParams& oracle) const {
  if (track_length < 4) throw ConfigError("track_length must be >= 4");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(speed_min > 0.0) || speed_min > speed_max) {
    throw ConfigError("speed range must satisfy 0 < speed_min <= speed_max");
  }
  if (speed_max > oracle.v_max) {
    throw ConfigError("speed_max exceeds the oracle speed cap");
  }
  if (!(accel_max > 0.0) || accel_max > oracle.a_max) {
    throw ConfigError("accel_max must lie in (0, oracle a_max]");
  }
  if (curvature_min < 0.0 || curvature_min > curvature_max) {
    throw ConfigError("curvature range must satisfy 0 <= min <= max");
  }
  if (curvature_max * speed_max > oracle.turn_rate_max) {
    throw ConfigError("curvature_max * speed_max implies a turn rate above "
                      "the oracle cap");
  }
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  const double total = mix.straight + mix.speed_change + mix.turn + mix.stop_and_go;
  if (mix.straight < 0 || mix.speed_change < 0 || mix.turn < 0 ||
      mix.stop_and_go < 0 || !(total > 0.0)) {
    throw ConfigError("scenario mix weights must be non-negative, not all 0");
  }
}

HumanoidState StartStateFor(const Trajectory& track) {
  const Vec2 first = track[1] - track[0];
  const double heading = WrapAngle(HeadingOf(first));
  const Vec2 velocity = first / track.dt;
  return GenerateWalkingPose(heading, velocity.norm(), 0.0, track[0]);
}

TrajectoryDataset GenerateSynthetic(const SyntheticConfig& config,
                                    std::size_t n_tracks, std::uint64_t seed,
                                    const OracleParams& oracle) {
  if (n_tracks < 1) throw ConfigError("n_tracks must be >= 1");
  config.Validate(oracle);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick({config.mix.straight,
                                        config.mix.speed_change,
                                        config.mix.turn,
                                        config.mix.stop_and_go});
  TrajectoryDataset ds;
  ds.dt = config.dt;
  ds.source = "synthetic:seed=" + std::to_string(seed);
  for (std::size_t i = 0; i < n_tracks; ++i) {
    const auto kind = static_cast<Template>(pick(rng));
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxTrackAttempts && !accepted; ++attempt) {
      Trajectory traj = SynthesizeTrack(kind, config, rng);
      const double reward =
          Rollout(FuturePart(traj), StartStateFor(traj), oracle);
      if (reward >= config.min_reward) {
        ds.tracks.push_back({static_cast<int>(i), 0, 1, std::move(traj)});
        accepted = true;
      }
    }
    if (!accepted) {
      throw ConfigError("scenario parameters never yield tracks the oracle "
                        "rates as feasible");
    }
  }
  return ds;
}

HumanoidState GenerateWalkingPose(double heading, double speed, double phase,
                                  const Vec2& root) {
  const double lean = 0.05 * speed;
  const double stride = 0.18 * speed;
  const double swing = stride * std::sin(phase);
  const double lift = 0.05 * std::max(0.0, std::cos(phase));
  const double lift_other = 0.05 * std::max(0.0, -std::cos(phase));
  const JointSet local = {
      {lean, 0.0, 1.70},                       // head
      {0.8 * lean, 0.19, 1.45},                // left shoulder
      {0.8 * lean, -0.19, 1.45},               // right shoulder
      {0.0, 0.0, 0.95},                        // pelvis
      {0.5 * swing, 0.10, 0.50 + lift},        // left knee
      {-0.5 * swing, -0.10, 0.50 + lift_other},  // right knee
      {swing, 0.10, 0.08 + lift},              // left ankle
      {-swing, -0.10, 0.08 + lift_other},      // right ankle
  };
  // Limb velocities from the phase rate of a fixed cadence.
  const double phase_rate = 2.0 * kPi * 0.9;
  const double dswing = stride * std::cos(phase) * phase_rate;
  const JointSet local_vel = {
      {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0},
      {0.5 * dswing, 0, 0}, {-0.5 * dswing, 0, 0},
      {dswing, 0, 0}, {-dswing, 0, 0},
  };
  HumanoidState s;
  s.heading = WrapAngle(heading);
  s.root_velocity = speed * Vec2(std::cos(s.heading), std::sin(s.heading));
  const Vec3 base_vel(s.root_velocity.x(), s.root_velocity.y(), 0.0);
  for (int j = 0; j < kNumJoints; ++j) {
    Vec3 p = RotateYaw(local[j], s.heading);
    p.head<2>() += root;
    s.joints.push_back(p);
    s.joint_velocities.push_back(base_vel + RotateYaw(local_vel[j], s.heading));
  }
  return s;
}

std::vector<PoseBankEntry> GeneratePoseBank(std::size_t n, std::uint64_t seed,
                                            double speed_min,
                                            double speed_max) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  std::uniform_real_distribution<double> speed(speed_min, speed_max);
  std::uniform_real_distribution<double> place(-5.0, 5.0);
  std::vector<PoseBankEntry> bank;
  bank.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double heading = angle(rng);
    const double v = speed(rng);
    const double phase = angle(rng);
    const Vec2 root(place(rng), place(rng));
    bank.push_back({"walk_" + std::to_string(i),
                    GenerateWalkingPose(heading, v, phase, root)});
  }
  return bank;
}

std::vector<HumanoidState> States(std::span<const PoseBankEntry> bank) {
  std::vector<HumanoidState> out;
  out.reserve(bank.size());
  for (const PoseBankEntry& e : bank) out.push_back(e.state);
  return out;
}

nlohmann::json PoseBankToJson(std::span<const PoseBankEntry> bank) {
  nlohmann::json out = nlohmann::json::array();
  for (const PoseBankEntry& e : bank) {
    nlohmann::json joints = nlohmann::json::object();
    for (int j = 0; j < kNumJoints; ++j) {
      const Vec3& p = e.state.joints[j];
      joints[std::string(kJointNames[j])] = {p.x(), p.y(), p.z()};
    }
    out.push_back({{"name", e.name},
                   {"joints", joints},
                   {"heading", e.state.heading},
                   {"speed", e.state.root_velocity.norm()}});
  }
  return out;
}

std::vector<PoseBankEntry> PoseBankFromJson(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("pose bank must be a JSON list");
  std::vector<PoseBankEntry> bank;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const nlohmann::json& e = j[i];
    PoseBankEntry entry;
    try {
      entry.name = e.at("name").get<std::string>();
      const nlohmann::json& joints = e.at("joints");
      entry.state.joints.resize(kNumJoints);
      for (int k = 0; k < kNumJoints; ++k) {
        const std::string name(kJointNames[k]);
        if (!joints.contains(name)) {
          throw InputError("pose '" + entry.name + "' lacks joint '" + name +
                           "'");
        }
        const auto xyz = joints.at(name).get<std::vector<double>>();
        if (xyz.size() != 3) {
          throw InputError("joint '" + name + "' needs 3 coordinates");
        }
        entry.state.joints[k] = Vec3(xyz[0], xyz[1], xyz[2]);
      }
      entry.state.heading = WrapAngle(e.at("heading").get<double>());
      const double speed = e.at("speed").get<double>();
      entry.state.root_velocity =
          speed * Vec2(std::cos(entry.state.heading),
                       std::sin(entry.state.heading));
    } catch (const nlohmann::json::exception& ex) {
      throw InputError("pose bank entry " + std::to_string(i) + ": " +
                       ex.what());
    }
    entry.state.Validate();
    bank.push_back(std::move(entry));
  }
  return bank;
}

std::vector<Trajectory> TrajectoryBank(const TrajectoryDataset& dataset,
                                       int horizon, int stride) {
  if (horizon < 1 || stride < 1) {
    throw InputError("bank windows need horizon >= 1 and stride >= 1");
  }
  std::vector<Trajectory> bank;
  const std::size_t len = static_cast<std::size_t>(horizon) + 1;
  for (const Track& t : dataset.tracks) {
    for (std::size_t s = 0; s + len <= t.trajectory.size(); s += stride) {
      bank.push_back({{t.trajectory.points.begin() + s,
                       t.trajectory.points.begin() + s + len},
                      dataset.dt});
    }
  }
  return bank;
}

void PoseSequence::Validate() const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CheckZ(frames[i].joints);
    if (i > 0 && !(frames[i].timestamp > frames[i - 1].timestamp)) {
      throw InputError("pose timestamps must be strictly increasing");
    }
  }
}

bool PoseIsUpright(const JointSet& j) {
  CheckZ(j);
  const double head = j[kHead].z();
  const double pelvis = j[kPelvis].z();
  const double knee = std::max(j[kLeftKnee].z(), j[kRightKnee].z());
  const double ankle = std::max(j[kLeftAnkle].z(), j[kRightAnkle].z());
  const double shoulder = std::min(j[kLeftShoulder].z(), j[kRightShoulder].z());
  return head > knee && head > pelvis && pelvis > ankle && pelvis < shoulder;
}

FramePartition PoseRuleFilter(const PoseSequence& seq) {
  seq.Validate();
  FramePartition out;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    (PoseIsUpright(seq.frames[i].joints) ? out.kept : out.rejected).push_back(i);
  }
  return out;
}

FramePartition PoseConsistencyFilter(const PoseSequence& seq, int window) {
  seq.Validate();
  const int n = static_cast<int>(seq.frames.size());
  if (window < 1 || window % 2 == 0) {
    throw InputError("consistency window must be a positive odd number");
  }
  if (window > n) {
    throw InputError("consistency window of " + std::to_string(window) +
                     " exceeds the sequence length " + std::to_string(n));
  }
  const int half = window / 2;
  // Odd reflection about the end frames keeps linear motion linear.
  auto at = [&](int f, int j) -> Vec3 {
    if (f < 0) return 2.0 * seq.frames[0].joints[j] - seq.frames[-f].joints[j];
    if (f >= n) {
      return 2.0 * seq.frames[n - 1].joints[j] -
             seq.frames[2 * (n - 1) - f].joints[j];
    }
    return seq.frames[f].joints[j];
  };
  std::vector<bool> reject(n, false);
  for (int j = 0; j < kNumJoints; ++j) {
    std::vector<double> dist(n);
    for (int f = 0; f < n; ++f) {
      Vec3 avg = Vec3::Zero();
      for (int o = -half; o <= half; ++o) avg += at(f + o, j);
      avg /= static_cast<double>(window);
      dist[f] = (seq.frames[f].joints[j] - avg).norm();
    }
    double mean = 0.0;
    for (double d : dist) mean += d;
    mean /= n;
    double var = 0.0;
    for (double d : dist) var += (d - mean) * (d - mean);
    const double sd = std::max(std::sqrt(var / n), kMinZScale);
    for (int f = 0; f < n; ++f) {
      if ((dist[f] - mean) / sd > kConsistencyZ) reject[f] = true;
    }
  }
  FramePartition out;
  for (int f = 0; f < n; ++f) {
    (reject[f] ? out.rejected : out.kept).push_back(f);
  }
  return out;
}

PoseFilterReport FilterPoseSequence(const PoseSequence& seq, int window) {
  const FramePartition rule = PoseRuleFilter(seq);
  PoseSequence upright;
  for (std::size_t i : rule.kept) upright.frames.push_back(seq.frames[i]);
  PoseFilterReport report;
  report.rejected_rule = rule.rejected;
  if (upright.frames.empty()) return report;
  const FramePartition consistent = PoseConsistencyFilter(upright, window);
  for (std::size_t i : consistent.kept) report.kept.push_back(rule.kept[i]);
  for (std::size_t i : consistent.rejected) {
    report.rejected_consistency.push_back(rule.kept[i]);
  }
  return report;
}

std::vector<TrainingInstance> MakeTrainingInstances(
    const TrajectoryDataset& dataset, std::span<const HumanoidState> pose_bank,
    int past_length, int horizon, int stride, std::uint64_t seed,
    InstanceStats* stats) {
  if (past_length < 2) throw InputError("T_p must be >= 2");
  if (horizon < 1) throw InputError("T_f must be >= 1");
  if (stride < 1) throw InputError("stride must be >= 1");
  if (pose_bank.empty()) throw InputError("pose bank is empty");
  std::mt19937_64 rng(seed);
  std::vector<TrainingInstance> out;
  InstanceStats local;
  const std::size_t span = static_cast<std::size_t>(past_length + horizon);
  for (const Track& track : dataset.tracks) {
    const auto& pts = track.trajectory.points;
    if (pts.size() < span) {
      ++local.skipped_tracks;
      continue;
    }
    for (std::size_t s = 0; s + span <= pts.size(); s += stride) {
      TrainingInstance inst;
      inst.past = {{pts.begin() + s, pts.begin() + s + past_length},
                   dataset.dt};
      inst.future = {{pts.begin() + s + past_length, pts.begin() + s + span},
                     dataset.dt};
      const Vec2 last = inst.past.points.back();
      const Vec2 velocity =
          (last - inst.past[inst.past.size() - 2]) / dataset.dt;
      double heading = 0.0;
      for (std::size_t t = inst.past.size() - 1; t > 0; --t) {
        const Vec2 d = inst.past[t] - inst.past[t - 1];
        if (d.x() != 0.0 || d.y() != 0.0) {
          heading = HeadingOf(d);
          break;
        }
      }
      std::vector<std::size_t> close;
      std::size_t nearest = 0;
      double nearest_gap = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pose_bank.size(); ++i) {
        const double gap =
            std::abs(pose_bank[i].root_velocity.norm() - velocity.norm());
        if (gap <= kSpeedMatch) close.push_back(i);
        if (gap < nearest_gap) {
          nearest_gap = gap;
          nearest = i;
        }
      }
      std::size_t choice = nearest;
      if (!close.empty()) {
        choice = close[std::uniform_int_distribution<std::size_t>(
            0, close.size() - 1)(rng)];
      }
      const HumanoidState pose =
          AlignPoseTo(pose_bank[choice], last, heading, velocity);
      inst.observable = pose.Observable();
      out.push_back(std::move(inst));
      ++local.windows;
    }
  }
  if (stats != nullptr) *stats = local;
  return out;
}

}  // namespace emloco
