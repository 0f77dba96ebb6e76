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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "emloco/error.h"
#include "emloco/metrics.h"

namespace emloco {
namespace {

void CheckShapes(const FeatureLayout& layout, const Trajectory& future,
                 const ObservableState& obs) {
  if (static_cast<int>(future.size()) != layout.horizon) {
    throw InputError("trajectory has " + std::to_string(future.size()) +
                     " points, layout expects " +
                     std::to_string(layout.horizon));
  }
  if (layout.include_pose && !obs.has_pose()) {
    throw InputError("layout needs a pose but the observation has none");
  }
}

double BatchMse(const LocoValModel& model, const Eigen::MatrixXd& features,
                const Eigen::RowVectorXd& targets) {
  if (features.cols() == 0) return 0.0;
  const Eigen::MatrixXd out = ForwardBatch(model.net, features);
  return (out.row(0) - targets).squaredNorm() / features.cols();
}

}  // namespace

int FeatureLayout::InputSize() const {
  return 2 * horizon + (include_pose ? 3 * num_joints : 0) +
         (include_velocity ? 2 : 0);
}

void FeatureLayout::Validate() const {
  if (horizon < 1) throw ConfigError("feature layout horizon must be >= 1");
  if (num_joints != kNumJoints) {
    throw ConfigError("feature layout must use " + std::to_string(kNumJoints) +
                      " joints");
  }
}

CanonicalFrame CanonicalFrame::Of(const ObservableState& obs) {
  return {obs.root, obs.Heading()};
}

std::pair<Trajectory, ObservableState> ToCanonical(const Trajectory& future,
                                                   const ObservableState& obs) {
  const CanonicalFrame frame = CanonicalFrame::Of(obs);
  Trajectory traj{{}, future.dt};
  traj.points.reserve(future.size());
  for (const Vec2& p : future.points) traj.points.push_back(frame.ToLocal(p));
  ObservableState local;
  local.root = Vec2::Zero();
  local.root_velocity = frame.DirectionToLocal(obs.root_velocity);
  for (const Vec3& j : obs.joints) {
    const Vec2 xy = frame.ToLocal(j.head<2>());
    local.joints.emplace_back(xy.x(), xy.y(), j.z());
  }
  return {std::move(traj), std::move(local)};
}

Eigen::VectorXd Canonicalize(const Trajectory& future,
                             const ObservableState& obs,
                             const FeatureLayout& layout) {
  CheckShapes(layout, future, obs);
  const CanonicalFrame frame = CanonicalFrame::Of(obs);
  Eigen::VectorXd f(layout.InputSize());
  int k = 0;
  Vec2 prev = obs.root;
  for (const Vec2& p : future.points) {
    const Vec2 d = frame.DirectionToLocal(p - prev);
    f(k++) = d.x();
    f(k++) = d.y();
    prev = p;
  }
  if (layout.include_pose) {
    for (const Vec3& j : obs.joints) {
      const Vec2 xy = frame.ToLocal(j.head<2>());
      f(k++) = xy.x();
      f(k++) = xy.y();
      f(k++) = j.z();
    }
  }
  if (layout.include_velocity) {
    const Vec2 v = frame.DirectionToLocal(obs.root_velocity);
    f(k++) = v.x();
    f(k++) = v.y();
  }
  return f;
}

std::vector<Vec2> TrajectoryGradient(
    const FeatureLayout& layout, const CanonicalFrame& frame,
    const Eigen::Ref<const Eigen::VectorXd>& feature_grad) {
  const int horizon = layout.horizon;
  std::vector<Vec2> grad(horizon);
  // Point t enters displacement t with +1 and displacement t + 1 with -1.
  for (int t = 0; t < horizon; ++t) {
    Vec2 g(feature_grad(2 * t), feature_grad(2 * t + 1));
    if (t + 1 < horizon) {
      g -= Vec2(feature_grad(2 * t + 2), feature_grad(2 * t + 3));
    }
    grad[t] = frame.DirectionToWorld(g);
  }
  return grad;
}

LocoValModel CreateLocoVal(const FeatureLayout& layout,
                           const std::vector<int>& hidden, std::uint64_t seed) {
  layout.Validate();
  std::vector<int> sizes = {layout.InputSize()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return {MlpModel::Create(sizes, Activation::kRelu, Activation::kSigmoid,
                           seed),
          layout};
}

LocoValTrainResult TrainLocoVal(std::span<const PlausibilitySample> dataset,
                                const LocoValOptions& options) {
  if (dataset.empty()) throw InputError("plausibility dataset is empty");
  options.train.Validate();
  FeatureLayout layout = options.layout;
  layout.horizon = static_cast<int>(dataset[0].trajectory.size());
  for (const PlausibilitySample& s : dataset) {
    if (static_cast<int>(s.trajectory.size()) != layout.horizon ||
        (layout.include_pose && s.observable.joints.size() !=
                                    static_cast<std::size_t>(kNumJoints))) {
      throw InputError("plausibility samples have inconsistent shapes");
    }
  }

  const std::size_t n = dataset.size();
  std::mt19937_64 rng(options.train.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_holdout =
      static_cast<std::size_t>(std::floor(options.holdout_fraction * n));
  std::vector<std::size_t> holdout(order.begin(), order.begin() + n_holdout);
  std::vector<std::size_t> train(order.begin() + n_holdout, order.end());

  const int dim = layout.InputSize();
  auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd* x,
                    Eigen::RowVectorXd* y) {
    x->resize(dim, static_cast<Eigen::Index>(idx.size()));
    y->resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const PlausibilitySample& s = dataset[idx[i]];
      x->col(i) = Canonicalize(s.trajectory, s.observable, layout);
      (*y)(i) = s.reward;
    }
  };
  Eigen::MatrixXd train_x, holdout_x;
  Eigen::RowVectorXd train_y, holdout_y;
  gather(train, &train_x, &train_y);
  gather(holdout, &holdout_x, &holdout_y);

  LocoValTrainResult result;
  result.model = CreateLocoVal(layout, options.hidden, options.train.seed);
  result.n_train = train.size();
  result.n_holdout = holdout.size();
  LocoValModel model = result.model;
  AdamW optimizer(model.net, options.train.adam);

  // Model selection falls back to the training loss without a held-out set.
  auto selection_loss = [&]() {
    return n_holdout > 0 ? BatchMse(model, holdout_x, holdout_y)
                         : BatchMse(model, train_x, train_y);
  };
  result.best_holdout_mse = selection_loss();
  result.best_step = 0;

  const int batch = std::min<int>(options.train.batch_size,
                                  static_cast<int>(train.size()));
  const int steps_per_epoch =
      (static_cast<int>(train.size()) + batch - 1) / batch;
  std::vector<Eigen::Index> perm(train.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t cursor = perm.size();
  Eigen::MatrixXd xb(dim, batch);
  Eigen::RowVectorXd yb(batch);
  ForwardTape tape;
  double epoch_loss = 0.0;
  int epoch_batches = 0;
  for (int step = 0; step < options.train.total_steps; ++step) {
    for (int b = 0; b < batch; ++b) {
      if (cursor == perm.size()) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      xb.col(b) = train_x.col(perm[cursor]);
      yb(b) = train_y(perm[cursor]);
      ++cursor;
    }
    const Eigen::MatrixXd out = ForwardBatch(model.net, xb, &tape);
    const Eigen::RowVectorXd err = out.row(0) - yb;
    epoch_loss += err.squaredNorm() / batch;
    ++epoch_batches;
    const BackwardResult back =
        Backward(model.net, tape, (2.0 / batch) * err);
    const double lr = ScheduledLr(options.train, step);
    optimizer.Step(model.net, back.grads, lr, options.train.weight_decay,
                   step + 1);

    const bool epoch_end = (step + 1) % steps_per_epoch == 0 ||
                           step + 1 == options.train.total_steps;
    if (epoch_end) {
      const double sel = selection_loss();
      result.curve.push_back({(step + 1 + steps_per_epoch - 1) / steps_per_epoch,
                              step + 1, lr, epoch_loss / epoch_batches, sel});
      epoch_loss = 0.0;
      epoch_batches = 0;
      if (sel < result.best_holdout_mse) {
        result.best_holdout_mse = sel;
        result.best_step = step + 1;
        result.model = model;
      }
    }
  }

  if (n_holdout >= 2) {
    const Eigen::MatrixXd pred = ForwardBatch(result.model.net, holdout_x);
    std::vector<double> p(pred.row(0).begin(), pred.row(0).end());
    std::vector<double> y(holdout_y.begin(), holdout_y.end());
    result.holdout_pearson = PearsonCorrelation(p, y);
  } else {
    result.holdout_pearson = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

double Score(const LocoValModel& model, const Trajectory& future,
             const ObservableState& obs) {
  return Forward(model.net, Canonicalize(future, obs, model.layout))(0);
}

std::vector<double> ScoreBatch(const LocoValModel& model,
                               std::span<const Trajectory> candidates,
                               const ObservableState& obs) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const Trajectory& c : candidates) scores.push_back(Score(model, c, obs));
  return scores;
}

ScoreGradient ScoreWithGradient(const LocoValModel& model,
                                const Trajectory& future,
                                const ObservableState& obs) {
  const Eigen::VectorXd features = Canonicalize(future, obs, model.layout);
  ForwardTape tape;
  const Eigen::MatrixXd out = ForwardBatch(model.net, features, &tape);
  const BackwardResult back = Backward(
      model.net, tape, Eigen::MatrixXd::Ones(1, 1), /*parameter_grads=*/false);
  return {out(0, 0), TrajectoryGradient(model.layout, CanonicalFrame::Of(obs),
                                        back.input_grad.col(0))};
}

nlohmann::json ToJson(const LocoValModel& model,
                      const TrainConfig* train_config) {
  nlohmann::json j = ToJson(model.net, train_config);
  j["feature_layout"] = {{"horizon", model.layout.horizon},
                         {"num_joints", model.layout.num_joints},
                         {"include_pose", model.layout.include_pose},
                         {"include_velocity", model.layout.include_velocity}};
  return j;
}

LocoValModel LocoValFromJson(const nlohmann::json& j) {
  LocoValModel model;
  model.net = MlpFromJson(j);
  try {
    const nlohmann::json& fl = j.at("feature_layout");
    model.layout.horizon = fl.at("horizon").get<int>();
    model.layout.num_joints = fl.at("num_joints").get<int>();
    model.layout.include_pose = fl.at("include_pose").get<bool>();
    model.layout.include_velocity = fl.at("include_velocity").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed feature_layout: ") + e.what());
  }
  if (model.net.input_size() != model.layout.InputSize() ||
      model.net.output_size() != 1 ||
      model.net.output_activation != Activation::kSigmoid) {
    throw InputError("checkpoint network does not match its feature layout");
  }
  return model;
}

std::string Checksum(const LocoValModel& model) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto mix = [&hash](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ULL;
    }
  };
  for (double p : model.net.FlatParameters()) mix(&p, sizeof(p));
  const int layout[4] = {model.layout.horizon, model.layout.num_joints,
                         model.layout.include_pose ? 1 : 0,
                         model.layout.include_velocity ? 1 : 0};
  mix(layout, sizeof(layout));
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

}  // namespace emloco
