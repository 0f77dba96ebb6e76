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

#include "emloco/locoval.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "emloco/datakit.h"
#include "emloco/error.h"
#include "emloco/metrics.h"
#include "emloco/oracle.h"
#include "test_support.h"

namespace emloco {
namespace {

using testing::RandomWalk;
using testing::Straight;
using testing::Walker;

ObservableState Obs(double heading, double speed, const Vec2& root) {
  return Walker(heading, speed, root).Observable();
}

TEST(FeatureLayoutTest, InputSize) {
  FeatureLayout l;
  EXPECT_EQ(l.InputSize(), 2 * 12 + 3 * 8 + 2);
  l.include_pose = false;
  EXPECT_EQ(l.InputSize(), 26);
  l.include_velocity = false;
  EXPECT_EQ(l.InputSize(), 24);
  l.horizon = 0;
  EXPECT_THROW(l.Validate(), ConfigError);
}

TEST(CanonicalizeTest, CanonicalInputIsRawConcatenation) {
  const ObservableState obs = Obs(0.0, 1.2, Vec2::Zero());
  std::mt19937_64 rng(1);
  const Trajectory t = RandomWalk(rng, Vec2::Zero(), 12, 0.3);
  const Eigen::VectorXd f = Canonicalize(t, obs, {});
  std::vector<double> raw;
  Vec2 prev = Vec2::Zero();
  for (const Vec2& p : t.points) {
    raw.push_back(p.x() - prev.x());
    raw.push_back(p.y() - prev.y());
    prev = p;
  }
  for (const Vec3& j : obs.joints) {
    raw.push_back(j.x());
    raw.push_back(j.y());
    raw.push_back(j.z());
  }
  raw.push_back(obs.root_velocity.x());
  raw.push_back(obs.root_velocity.y());
  ASSERT_EQ(f.size(), static_cast<Eigen::Index>(raw.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(f(i), raw[i], 1e-15) << i;
  }
}

TEST(CanonicalizeTest, RigidMotionInvariance) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const ObservableState obs = Obs(0.3 * i, 1.0, Vec2(0.5, -0.5));
    const Trajectory t = RandomWalk(rng, Vec2(0.5, -0.5), 12, 0.4);
    const RigidTransform2 x{1.1 * i - 7.0, Vec2(-3.0 * i, 4.0)};
    const Eigen::VectorXd a = Canonicalize(t, obs, {});
    const Eigen::VectorXd b = Canonicalize(x.Apply(t), x.Apply(obs), {});
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(CanonicalizeTest, QuarterTurnVelocity) {
  const ObservableState obs = Obs(kPi / 2, 1.0, Vec2(2, 3));
  ASSERT_NEAR(obs.root_velocity.x(), 0.0, 1e-15);
  ASSERT_NEAR(obs.root_velocity.y(), 1.0, 1e-15);
  const Eigen::VectorXd f =
      Canonicalize(Straight(Vec2(2, 3), kPi / 2, 1.0, 12), obs, {});
  EXPECT_NEAR(f(f.size() - 2), 1.0, 1e-12);
  EXPECT_NEAR(f(f.size() - 1), 0.0, 1e-12);
}

TEST(CanonicalizeTest, Idempotent) {
  std::mt19937_64 rng(3);
  const ObservableState obs = Obs(2.2, 0.8, Vec2(4, 1));
  const Trajectory t = RandomWalk(rng, Vec2(4, 1), 12, 0.3);
  const auto [ct, cobs] = ToCanonical(t, obs);
  EXPECT_LE((Canonicalize(ct, cobs, {}) - Canonicalize(t, obs, {}))
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_NEAR(cobs.root.norm(), 0.0, 1e-12);
  EXPECT_NEAR(cobs.Heading(), 0.0, 1e-12);
}

TEST(CanonicalizeTest, LengthMismatchRejected) {
  const ObservableState obs = Obs(0.0, 1.0, Vec2::Zero());
  EXPECT_THROW(Canonicalize(Straight(Vec2::Zero(), 0, 1, 8), obs, {}),
               InputError);
  ObservableState no_pose = obs;
  no_pose.joints.clear();
  EXPECT_THROW(Canonicalize(Straight(Vec2::Zero(), 0, 1, 12), no_pose, {}),
               InputError);
  FeatureLayout pose_free;
  pose_free.include_pose = false;
  EXPECT_EQ(Canonicalize(Straight(Vec2::Zero(), 0, 1, 12), no_pose, pose_free)
                .size(),
            26);
}

TEST(ScoreTest, BoundedBatchedAndDeterministic) {
  const LocoValModel m = CreateLocoVal({}, {32, 32}, 4);
  std::mt19937_64 rng(5);
  const ObservableState obs = Obs(0.7, 1.1, Vec2(1, 1));
  std::vector<Trajectory> cands;
  for (int i = 0; i < 10; ++i) cands.push_back(RandomWalk(rng, Vec2(1, 1), 12));
  const std::vector<double> batch = ScoreBatch(m, cands, obs);
  ASSERT_EQ(batch.size(), cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double s = Score(m, cands[i], obs);
    EXPECT_EQ(batch[i], s);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
  EXPECT_TRUE(ScoreBatch(m, {}, obs).empty());
  const std::vector<Trajectory> one = {cands[0]};
  EXPECT_EQ(ScoreBatch(m, one, obs), std::vector<double>{batch[0]});
}

TEST(ScoreTest, RigidMotionInvariance) {
  const LocoValModel m = CreateLocoVal({}, {32, 32}, 6);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const ObservableState obs = Obs(-0.4 * i, 0.9, Vec2(0, 0));
    const Trajectory t = RandomWalk(rng, Vec2::Zero(), 12, 0.4);
    const RigidTransform2 x{0.9 * i, Vec2(10.0, -2.0 * i)};
    EXPECT_NEAR(Score(m, t, obs), Score(m, x.Apply(t), x.Apply(obs)), 1e-9);
  }
}

TEST(ScoreTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const LocoValModel m = CreateLocoVal({}, {32, 32}, seed);
    std::mt19937_64 rng(seed + 100);
    const ObservableState obs = Obs(0.2 * seed, 1.0, Vec2(1, 2));
    const Trajectory t = RandomWalk(rng, Vec2(1, 2), 12, 0.4);
    const ScoreGradient g = ScoreWithGradient(m, t, obs);
    EXPECT_EQ(g.score, Score(m, t, obs));
    const double eps = 1e-6;
    for (int i = 0; i < 12; ++i) {
      for (int c = 0; c < 2; ++c) {
        Trajectory plus = t;
        Trajectory minus = t;
        plus[i](c) += eps;
        minus[i](c) -= eps;
        const double fd = (Score(m, plus, obs) - Score(m, minus, obs)) / (2 * eps);
        const double a = g.d_points[i](c);
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        EXPECT_LT(rel, 1e-4) << "seed " << seed << " point " << i;
      }
    }
  }
}

PlausibilitySample Sample(const Trajectory& t, const ObservableState& obs,
                          double reward) {
  PlausibilitySample s;
  s.trajectory = t;
  s.observable = obs;
  s.reward = reward;
  return s;
}

TEST(TrainTest, SinglePointRegression) {
  const ObservableState obs = Obs(0.0, 1.0, Vec2::Zero());
  const std::vector<PlausibilitySample> d = {
      Sample(Straight(Vec2::Zero(), 0.0, 1.0, 12), obs, 0.63)};
  LocoValOptions o;
  o.hidden = {16, 16};
  o.train.total_steps = 500;
  o.train.batch_size = 1;
  o.train.learning_rate = 1e-2;
  const LocoValTrainResult r = TrainLocoVal(d, o);
  const double s = Score(r.model, d[0].trajectory, obs);
  EXPECT_LT((s - 0.63) * (s - 0.63), 1e-4);
}

TEST(TrainTest, ConstantTargetRegression) {
  std::mt19937_64 rng(8);
  std::vector<PlausibilitySample> d;
  for (int i = 0; i < 60; ++i) {
    d.push_back(Sample(RandomWalk(rng, Vec2::Zero(), 12, 0.4),
                       Obs(0.1 * i, 1.0, Vec2::Zero()), 0.8));
  }
  LocoValOptions o;
  o.hidden = {32, 32};
  o.train.total_steps = 800;
  o.train.learning_rate = 3e-3;
  const LocoValTrainResult r = TrainLocoVal(d, o);
  for (const PlausibilitySample& s : d) {
    EXPECT_NEAR(Score(r.model, s.trajectory, s.observable), 0.8, 0.02);
  }
}

TEST(TrainTest, TracksOracleOnLabeledPairs) {
  const TrajectoryDataset ds = GenerateSynthetic({}, 60, 21);
  const auto poses = States(GeneratePoseBank(60, 22));
  const auto bank = TrajectoryBank(ds, 12, 2);
  const auto train = BuildPlausibilityDataset(poses, bank, 200, 200, {}, 23);
  const auto test = BuildPlausibilityDataset(poses, bank, 100, 100, {}, 24);
  LocoValOptions o;
  o.train.total_steps = 3000;
  o.train.weight_decay = 1e-4;
  o.train.seed = 3;
  const LocoValTrainResult r = TrainLocoVal(train, o);
  EXPECT_GE(r.holdout_pearson, 0.8);
  EXPECT_EQ(r.n_holdout, 40u);
  EXPECT_FALSE(r.curve.empty());

  std::vector<double> scores;
  std::vector<double> rewards;
  double plausible = 0.0;
  double implausible = 0.0;
  for (const PlausibilitySample& s : test) {
    const double v = Score(r.model, s.trajectory, s.observable);
    scores.push_back(v);
    rewards.push_back(s.reward);
    (s.label == PairLabel::kPlausible ? plausible : implausible) += v;
  }
  EXPECT_GE(PearsonCorrelation(scores, rewards), 0.8);
  EXPECT_GE(plausible / 100 - implausible / 100, 0.15);
}

TEST(TrainTest, InconsistentShapesRejected) {
  const ObservableState obs = Obs(0.0, 1.0, Vec2::Zero());
  std::vector<PlausibilitySample> d = {
      Sample(Straight(Vec2::Zero(), 0.0, 1.0, 12), obs, 0.5),
      Sample(Straight(Vec2::Zero(), 0.0, 1.0, 10), obs, 0.5)};
  EXPECT_THROW(TrainLocoVal(d, {}), InputError);
  EXPECT_THROW(TrainLocoVal({}, {}), InputError);
}

TEST(TrainTest, DeterministicGivenSeed) {
  std::mt19937_64 rng(9);
  std::vector<PlausibilitySample> d;
  for (int i = 0; i < 40; ++i) {
    d.push_back(Sample(RandomWalk(rng, Vec2::Zero(), 12, 0.4),
                       Obs(0.1 * i, 1.0, Vec2::Zero()), 0.01 * i));
  }
  LocoValOptions o;
  o.hidden = {16};
  o.train.total_steps = 100;
  EXPECT_EQ(Checksum(TrainLocoVal(d, o).model),
            Checksum(TrainLocoVal(d, o).model));
}

TEST(SerializationTest, RoundTripAndChecksum) {
  FeatureLayout layout;
  layout.include_velocity = false;
  const LocoValModel m = CreateLocoVal(layout, {16, 8}, 12);
  const LocoValModel back =
      LocoValFromJson(nlohmann::json::parse(ToJson(m).dump()));
  EXPECT_EQ(back.layout, m.layout);
  const ObservableState obs = Obs(1.0, 1.0, Vec2(1, 1));
  const Trajectory t = Straight(Vec2(1, 1), 1.0, 1.0, 12);
  EXPECT_EQ(Score(back, t, obs), Score(m, t, obs));
  EXPECT_EQ(Checksum(back), Checksum(m));
  EXPECT_EQ(Checksum(m).size(), 16u);
  EXPECT_NE(Checksum(m), Checksum(CreateLocoVal(layout, {16, 8}, 13)));
}

}  // namespace
}  // namespace emloco
