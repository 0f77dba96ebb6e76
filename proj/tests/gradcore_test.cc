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

#include "emloco/gradcore.h"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "emloco/error.h"

namespace emloco {
namespace {

double SquaredLoss(const Eigen::VectorXd& out, Eigen::VectorXd* grad,
                   const Eigen::VectorXd& target) {
  const Eigen::VectorXd diff = out - target;
  if (grad) *grad = 2.0 * diff;
  return diff.squaredNorm();
}

TEST(ForwardTest, ZeroModelGivesZeros) {
  MlpModel m = MlpModel::Create({3, 4, 2}, Activation::kRelu,
                                Activation::kIdentity, 1);
  for (auto& w : m.weights) w.setZero();
  EXPECT_TRUE(Forward(m, Eigen::Vector3d(1, -2, 3)).isZero(0.0));
}

TEST(ForwardTest, IdentityLayerReturnsInput) {
  MlpModel m = MlpModel::Create({3, 3}, Activation::kRelu,
                                Activation::kIdentity, 1);
  m.weights[0].setIdentity();
  const Eigen::Vector3d v(0.5, -1.5, 2.0);
  EXPECT_EQ(Forward(m, v), v);
}

TEST(ForwardTest, HandEvaluatedTwoThreeOne) {
  MlpModel m = MlpModel::Create({2, 3, 1}, Activation::kTanh,
                                Activation::kSigmoid, 1);
  const double w1[3][2] = {{0.1, -0.2}, {0.3, 0.4}, {-0.5, 0.6}};
  const double b1[3] = {0.01, -0.02, 0.03};
  const double w2[3] = {0.7, -0.8, 0.9};
  const double b2 = -0.1;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) m.weights[0](i, j) = w1[i][j];
    m.biases[0](i) = b1[i];
    m.weights[1](0, i) = w2[i];
  }
  m.biases[1](0) = b2;

  const double x[2] = {1.5, -0.5};
  double z = b2;
  for (int i = 0; i < 3; ++i) {
    double a = b1[i];
    for (int j = 0; j < 2; ++j) a += w1[i][j] * x[j];
    z += w2[i] * std::tanh(a);
  }
  const double expected = 1.0 / (1.0 + std::exp(-z));
  EXPECT_NEAR(Forward(m, Eigen::Vector2d(x[0], x[1]))(0), expected, 1e-15);
}

TEST(ForwardTest, DimensionMismatchThrows) {
  MlpModel m = MlpModel::Create({3, 2}, Activation::kRelu,
                                Activation::kIdentity, 1);
  EXPECT_THROW(Forward(m, Eigen::Vector2d(1, 2)), InputError);
}

TEST(ForwardTest, SigmoidOutputInsideUnitInterval) {
  MlpModel m = MlpModel::Create({4, 16, 3}, Activation::kRelu,
                                Activation::kSigmoid, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int t = 0; t < 100; ++t) {
    Eigen::Vector4d x(n(rng), n(rng), n(rng), n(rng));
    const Eigen::VectorXd y = Forward(m, x);
    EXPECT_TRUE((y.array() > 0.0).all() && (y.array() < 1.0).all());
  }
}

TEST(ForwardTest, Deterministic) {
  MlpModel m = MlpModel::Create({5, 8, 8, 2}, Activation::kRelu,
                                Activation::kTanh, 9);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -1, 1);
  EXPECT_EQ(Forward(m, x), Forward(m, x));
}

TEST(ForwardTest, BatchMatchesSingles) {
  MlpModel m = MlpModel::Create({3, 6, 2}, Activation::kTanh,
                                Activation::kIdentity, 4);
  Eigen::MatrixXd xs = Eigen::MatrixXd::Random(3, 5);
  const Eigen::MatrixXd ys = ForwardBatch(m, xs);
  for (int c = 0; c < 5; ++c) {
    EXPECT_TRUE(ys.col(c).isApprox(Forward(m, xs.col(c)), 1e-14));
  }
}

TEST(InitTest, GlorotBoundsAndZeroBias) {
  MlpModel m = MlpModel::Create({10, 20, 5}, Activation::kRelu,
                                Activation::kIdentity, 11);
  for (int l = 0; l < m.num_layers(); ++l) {
    const double bound =
        std::sqrt(6.0 / (m.layer_sizes[l] + m.layer_sizes[l + 1]));
    EXPECT_LE(m.weights[l].cwiseAbs().maxCoeff(), bound);
    EXPECT_TRUE(m.biases[l].isZero(0.0));
  }
  MlpModel same = MlpModel::Create({10, 20, 5}, Activation::kRelu,
                                   Activation::kIdentity, 11);
  EXPECT_EQ(m.FlatParameters(), same.FlatParameters());
}

TEST(BackwardTest, ZeroUpstreamGivesZeroGradients) {
  MlpModel m = MlpModel::Create({3, 5, 2}, Activation::kTanh,
                                Activation::kIdentity, 2);
  const BackwardResult r =
      Backward(m, Eigen::Vector3d(1, 2, 3), Eigen::Vector2d::Zero());
  EXPECT_TRUE(r.grads.AllZero());
  EXPECT_TRUE(r.input_grad.isZero(0.0));
}

TEST(BackwardTest, LinearOneOneClosedForm) {
  MlpModel m = MlpModel::Create({1, 1}, Activation::kRelu,
                                Activation::kIdentity, 1);
  const double w = 1.7;
  const double x = 0.6;
  const double y = 2.0;
  m.weights[0](0, 0) = w;
  Eigen::VectorXd in(1), target(1), grad_out;
  in << x;
  target << y;
  SquaredLoss(Forward(m, in), &grad_out, target);
  const BackwardResult r = Backward(m, in, grad_out);
  EXPECT_NEAR(r.grads.weights[0](0, 0), 2.0 * (w * x - y) * x, 1e-15);
  EXPECT_NEAR(r.grads.biases[0](0), 2.0 * (w * x - y), 1e-15);
  EXPECT_NEAR(r.input_grad(0, 0), 2.0 * w * (w * x - y), 1e-15);
}

TEST(BackwardTest, NonFiniteGradientNamesLayer) {
  MlpModel m = MlpModel::Create({2, 3, 1}, Activation::kTanh,
                                Activation::kIdentity, 2);
  Eigen::VectorXd up(1);
  up << std::numeric_limits<double>::infinity();
  try {
    Backward(m, Eigen::Vector2d(0.3, 0.4), up);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.layer(), 1);
  }
}

TEST(BackwardTest, MatchesFiniteDifferencesOverSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MlpModel m = MlpModel::Create({4, 7, 5, 3}, Activation::kTanh,
                                  Activation::kSigmoid, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& b : m.biases) {
      for (int i = 0; i < b.size(); ++i) b(i) = 0.1 * n(rng);
    }
    Eigen::VectorXd x(4), target(3);
    for (int i = 0; i < 4; ++i) x(i) = n(rng);
    for (int i = 0; i < 3; ++i) target(i) = 0.5 + 0.2 * n(rng);
    LossFn loss = [&](const Eigen::VectorXd& o, Eigen::VectorXd* g) {
      return SquaredLoss(o, g, target);
    };
    const GradCheckReport r = GradCheck(m, loss, x, 1e-5, 1e-4);
    EXPECT_TRUE(r.passed) << "seed " << seed << " error "
                          << r.max_relative_error;
    EXPECT_EQ(r.num_parameters, m.parameter_count());
  }
}

TEST(GradCheckTest, LinearSquaredLossIsTight) {
  MlpModel m = MlpModel::Create({3, 2}, Activation::kRelu,
                                Activation::kIdentity, 8);
  const Eigen::Vector2d target(0.3, -0.7);
  LossFn loss = [&](const Eigen::VectorXd& o, Eigen::VectorXd* g) {
    return SquaredLoss(o, g, target);
  };
  const GradCheckReport r =
      GradCheck(m, loss, Eigen::Vector3d(0.2, -1.1, 0.8), 1e-5, 1e-6);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(GradCheckTest, ReluNetworkPassesAfterNudging) {
  MlpModel m = MlpModel::Create({6, 16, 16, 1}, Activation::kRelu,
                                Activation::kSigmoid, 21);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd x =
      NudgeAwayFromKinks(m, Eigen::VectorXd::Zero(6), 1e-3, rng);
  EXPECT_GE(MinReluMargin(m, x), 1e-3);
  LossFn loss = [](const Eigen::VectorXd& o, Eigen::VectorXd* g) {
    const double d = o(0) - 1.0;
    if (g) *g = Eigen::VectorXd::Constant(1, 2.0 * d);
    return d * d;
  };
  EXPECT_TRUE(GradCheck(m, loss, x, 1e-5, 1e-4).passed);
}

TEST(GradCheckTest, ZeroToleranceFlagsFailure) {
  MlpModel m = MlpModel::Create({3, 5, 1}, Activation::kTanh,
                                Activation::kSigmoid, 4);
  LossFn loss = [](const Eigen::VectorXd& o, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Constant(1, 2.0 * o(0));
    return o(0) * o(0);
  };
  EXPECT_FALSE(GradCheck(m, loss, Eigen::Vector3d(1, 2, 3), 1e-5, 0.0).passed);
}

TEST(AdamWTest, ZeroGradientZeroDecayIsIdentity) {
  MlpModel m = MlpModel::Create({3, 4, 2}, Activation::kRelu,
                                Activation::kIdentity, 6);
  const std::vector<double> before = m.FlatParameters();
  AdamW opt(m);
  for (int s = 1; s <= 5; ++s) {
    opt.Step(m, MlpGradients::ZerosLike(m), 1e-2, 0.0, s);
  }
  EXPECT_EQ(m.FlatParameters(), before);
}

TEST(AdamWTest, DecoupledDecayShrinksParameters) {
  MlpModel m = MlpModel::Create({3, 2}, Activation::kRelu,
                                Activation::kIdentity, 6);
  const std::vector<double> before = m.FlatParameters();
  AdamW opt(m);
  opt.Step(m, MlpGradients::ZerosLike(m), 0.1, 0.01, 1);
  const std::vector<double> after = m.FlatParameters();
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_DOUBLE_EQ(after[i], before[i] * (1.0 - 0.1 * 0.01));
  }
}

TEST(AdamWTest, TwoStepsFollowHandRecurrence) {
  MlpModel m = MlpModel::Create({2, 1}, Activation::kRelu,
                                Activation::kIdentity, 6);
  const double p0 = m.weights[0](0, 0);
  const double lr = 0.05;
  const double g1 = 0.3;
  const double g2 = -1.2;
  AdamW opt(m);
  MlpGradients g = MlpGradients::ZerosLike(m);
  g.weights[0](0, 0) = g1;
  opt.Step(m, g, lr, 0.0, 1);
  const double p1 = p0 - lr * g1 / (std::abs(g1) + 1e-8);
  EXPECT_NEAR(m.weights[0](0, 0), p1, 1e-15);
  EXPECT_LT(m.weights[0](0, 0), p0);

  g.weights[0](0, 0) = g2;
  opt.Step(m, g, lr, 0.0, 2);
  const double mom = 0.9 * (0.1 * g1) + 0.1 * g2;
  const double var = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double m_hat = mom / (1.0 - 0.9 * 0.9);
  const double v_hat = var / (1.0 - 0.999 * 0.999);
  EXPECT_NEAR(m.weights[0](0, 0), p1 - lr * m_hat / (std::sqrt(v_hat) + 1e-8),
              1e-14);
}

TEST(CosineLrTest, Endpoints) {
  EXPECT_DOUBLE_EQ(CosineLr(1e-3, 0, 100, 1e-5), 1e-3);
  EXPECT_DOUBLE_EQ(CosineLr(1e-3, 100, 100, 1e-5), 1e-5);
  EXPECT_NEAR(CosineLr(1e-3, 50, 100, 1e-5), (1e-3 + 1e-5) / 2.0, 1e-18);
  EXPECT_DOUBLE_EQ(CosineLr(1e-3, 150, 100, 1e-5), 1e-5);
}

TEST(CosineLrTest, ScheduledConstant) {
  TrainConfig c;
  c.schedule = Schedule::kConstant;
  c.learning_rate = 0.01;
  EXPECT_DOUBLE_EQ(ScheduledLr(c, 500), 0.01);
}

TEST(TrainConfigTest, ValidationAndJsonRoundTrip) {
  TrainConfig c;
  c.learning_rate = 0.0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c.learning_rate = 2e-3;
  c.weight_decay = 1e-4;
  c.total_steps = 77;
  c.seed = 99;
  const TrainConfig back = TrainConfigFromJson(ToJson(c));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.total_steps, c.total_steps);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.adam.beta2, 0.999);
}

TEST(SerializationTest, RoundTripIsBitExact) {
  MlpModel m = MlpModel::Create({4, 9, 3}, Activation::kTanh,
                                Activation::kSigmoid, 17);
  m.biases[0].setConstant(0.123456789);
  const MlpModel back = MlpFromJson(nlohmann::json::parse(ToJson(m).dump()));
  const Eigen::Vector4d x(0.1, -0.2, 0.3, 0.7);
  EXPECT_EQ(Forward(back, x), Forward(m, x));
  EXPECT_EQ(back.FlatParameters(), m.FlatParameters());
  EXPECT_EQ(back.seed, 17u);
}

TEST(SerializationTest, RejectsWrongParameterCount) {
  MlpModel m = MlpModel::Create({2, 2}, Activation::kRelu,
                                Activation::kIdentity, 1);
  nlohmann::json j = ToJson(m);
  j["parameters"].push_back(1.0);
  EXPECT_THROW(MlpFromJson(j), InputError);
}

TEST(ActivationTest, NamesRoundTrip) {
  for (Activation a : {Activation::kIdentity, Activation::kRelu,
                       Activation::kTanh, Activation::kSigmoid}) {
    EXPECT_EQ(ParseActivation(ActivationName(a)), a);
  }
  EXPECT_THROW(ParseActivation("gelu"), ConfigError);
}

}  // namespace
}  // namespace emloco
