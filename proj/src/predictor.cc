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

#include "emloco/predictor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "emloco/error.h"

namespace emloco {
namespace {

void CheckInputs(const PredictorLayout& layout, const Trajectory& past,
                 const ObservableState& obs) {
  if (static_cast<int>(past.size()) != layout.past_length) {
    throw InputError("past trajectory has " + std::to_string(past.size()) +
                     " points, model expects " +
                     std::to_string(layout.past_length));
  }
  if (layout.include_pose && !obs.has_pose()) {
    throw InputError("model needs a pose but the observation has none");
  }
}

// World-frame points from canonical displacements (2 T_f entries).
Trajectory Integrate(const Eigen::Ref<const Eigen::VectorXd>& disp,
                     const Vec2& anchor, const CanonicalFrame& frame,
                     double dt) {
  const Eigen::Index horizon = disp.size() / 2;
  Trajectory out{{}, dt};
  out.points.reserve(horizon);
  Vec2 p = anchor;
  for (Eigen::Index t = 0; t < horizon; ++t) {
    p += frame.DirectionToWorld(Vec2(disp(2 * t), disp(2 * t + 1)));
    out.points.push_back(p);
  }
  return out;
}

// d loss / d canonical displacement from d loss / d world point. Point t
// depends on every displacement s <= t.
void AccumulateDisplacementGrad(std::span<const Vec2> point_grad,
                                const CanonicalFrame& frame,
                                Eigen::Ref<Eigen::VectorXd> out) {
  Vec2 suffix = Vec2::Zero();
  for (Eigen::Index s = static_cast<Eigen::Index>(point_grad.size()) - 1;
       s >= 0; --s) {
    suffix += point_grad[s];
    const Vec2 local = frame.DirectionToLocal(suffix);
    out(2 * s) += local.x();
    out(2 * s + 1) += local.y();
  }
}

double EmLocoTerm(double score, EmLocoForm form) {
  return form == EmLocoForm::kMseToOne ? (score - 1.0) * (score - 1.0) : -score;
}

double EmLocoSlope(double score, EmLocoForm form) {
  return form == EmLocoForm::kMseToOne ? 2.0 * (score - 1.0) : -1.0;
}

}  // namespace

int PredictorLayout::InputSize() const {
  return 2 * (past_length - 1) + 2 + (include_pose ? 3 * num_joints : 0);
}

void PredictorLayout::Validate() const {
  if (past_length < 2) throw ConfigError("T_p must be >= 2");
  if (horizon < 1) throw ConfigError("T_f must be >= 1");
  if (num_joints != kNumJoints) {
    throw ConfigError("predictor layout must use " +
                      std::to_string(kNumJoints) + " joints");
  }
}

PredictorModel CreatePredictor(const PredictorLayout& layout, int num_heads,
                               const std::vector<int>& trunk_hidden,
                               std::uint64_t seed) {
  layout.Validate();
  if (num_heads < 1) throw ConfigError("K must be >= 1");
  if (trunk_hidden.empty()) throw ConfigError("trunk needs a hidden layer");
  std::vector<int> sizes = {layout.InputSize()};
  sizes.insert(sizes.end(), trunk_hidden.begin(), trunk_hidden.end());
  PredictorModel model;
  model.layout = layout;
  model.trunk =
      MlpModel::Create(sizes, Activation::kRelu, Activation::kRelu, seed);
  std::seed_seq seq{seed, std::uint64_t{0x5eed}};
  std::vector<std::uint64_t> head_seeds(num_heads);
  seq.generate(head_seeds.begin(), head_seeds.end());
  for (int k = 0; k < num_heads; ++k) {
    model.heads.push_back(MlpModel::Create({trunk_hidden.back(),
                                            2 * layout.horizon},
                                           Activation::kIdentity,
                                           Activation::kIdentity,
                                           head_seeds[k]));
  }
  return model;
}

Eigen::VectorXd PredictorFeatures(const PredictorLayout& layout,
                                  const Trajectory& past,
                                  const ObservableState& obs) {
  CheckInputs(layout, past, obs);
  const CanonicalFrame frame = CanonicalFrame::Of(obs);
  Eigen::VectorXd f(layout.InputSize());
  int k = 0;
  for (std::size_t t = 1; t < past.size(); ++t) {
    const Vec2 d = frame.DirectionToLocal(past[t] - past[t - 1]);
    f(k++) = d.x();
    f(k++) = d.y();
  }
  const Vec2 v = frame.DirectionToLocal(obs.root_velocity);
  f(k++) = v.x();
  f(k++) = v.y();
  if (layout.include_pose) {
    for (const Vec3& j : obs.joints) {
      const Vec2 xy = frame.ToLocal(j.head<2>());
      f(k++) = xy.x();
      f(k++) = xy.y();
      f(k++) = j.z();
    }
  }
  return f;
}

PredictionSet Predict(const PredictorModel& model, const Trajectory& past,
                      const ObservableState& obs) {
  const Eigen::VectorXd hidden =
      Forward(model.trunk, PredictorFeatures(model.layout, past, obs));
  const CanonicalFrame frame = CanonicalFrame::Of(obs);
  PredictionSet set;
  for (const MlpModel& head : model.heads) {
    set.trajectories.push_back(
        Integrate(Forward(head, hidden), past.points.back(), frame, past.dt));
  }
  return set;
}

double LossMse(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size() || gt.empty()) {
    throw InputError("MSE needs equal, non-empty lengths");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    sum += (pred[t] - gt[t]).squaredNorm();
  }
  return sum / (2.0 * static_cast<double>(gt.size()));
}

MinMseResult LossMinMse(const PredictionSet& pred, const Trajectory& gt) {
  if (pred.trajectories.empty()) throw InputError("prediction set is empty");
  MinMseResult best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double loss = LossMse(pred.trajectories[k], gt);
    if (loss < best.loss) best = {loss, static_cast<int>(k)};
  }
  return best;
}

std::string EmLocoFormName(EmLocoForm form) {
  return form == EmLocoForm::kMseToOne ? "mse_to_one" : "negative_score";
}

EmLocoForm ParseEmLocoForm(const std::string& name) {
  if (name == "mse_to_one") return EmLocoForm::kMseToOne;
  if (name == "negative_score") return EmLocoForm::kNegativeScore;
  throw ConfigError("unknown EmLoco form '" + name + "'");
}

double LossEmLoco(const LocoValModel& locoval, const PredictionSet& pred,
                  const ObservableState& obs, EmLocoForm form) {
  if (pred.trajectories.empty()) throw InputError("prediction set is empty");
  double sum = 0.0;
  for (const Trajectory& t : pred.trajectories) {
    sum += EmLocoTerm(Score(locoval, t, obs), form);
  }
  return sum / static_cast<double>(pred.size());
}

std::vector<std::vector<Vec2>> LossEmLocoGradient(const LocoValModel& locoval,
                                                  const PredictionSet& pred,
                                                  const ObservableState& obs,
                                                  EmLocoForm form) {
  if (pred.trajectories.empty()) throw InputError("prediction set is empty");
  const double inv_k = 1.0 / static_cast<double>(pred.size());
  std::vector<std::vector<Vec2>> grads;
  for (const Trajectory& t : pred.trajectories) {
    ScoreGradient sg = ScoreWithGradient(locoval, t, obs);
    const double slope = EmLocoSlope(sg.score, form) * inv_k;
    for (Vec2& g : sg.d_points) g *= slope;
    grads.push_back(std::move(sg.d_points));
  }
  return grads;
}

double LossTotal(double trajectory_loss, double emloco_loss, double alpha) {
  if (alpha < 0.0) throw InputError("alpha must be >= 0");
  return trajectory_loss + alpha * emloco_loss;
}

PredictorTrainResult TrainPredictor(std::span<const TrainingInstance> dataset,
                                    const LocoValModel* locoval,
                                    const PredictorOptions& options) {
  if (dataset.empty()) throw InputError("training set is empty");
  if (options.alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (options.num_heads < 1) throw ConfigError("K must be >= 1");
  options.train.Validate();

  PredictorLayout layout;
  layout.past_length = static_cast<int>(dataset[0].past.size());
  layout.horizon = static_cast<int>(dataset[0].future.size());
  layout.include_pose = options.include_pose;
  layout.Validate();
  for (const TrainingInstance& inst : dataset) {
    if (static_cast<int>(inst.past.size()) != layout.past_length ||
        static_cast<int>(inst.future.size()) != layout.horizon) {
      throw InputError("training instances have inconsistent lengths");
    }
  }
  if (locoval != nullptr) {
    if (locoval->layout.horizon != layout.horizon) {
      throw ConfigError("surrogate horizon " +
                        std::to_string(locoval->layout.horizon) +
                        " does not match predictor horizon " +
                        std::to_string(layout.horizon));
    }
    if (locoval->layout.include_pose) {
      for (const TrainingInstance& inst : dataset) {
        if (!inst.observable.has_pose()) {
          throw ConfigError("surrogate needs poses the training data lacks");
        }
      }
    }
  }
  if (!options.trajectory_loss && locoval == nullptr) {
    throw ConfigError("training without L_T needs a surrogate");
  }

  const int n = static_cast<int>(dataset.size());
  const int horizon = layout.horizon;
  const int num_heads = options.num_heads;
  Eigen::MatrixXd features(layout.InputSize(), n);
  std::vector<CanonicalFrame> frames(n);
  for (int i = 0; i < n; ++i) {
    features.col(i) = PredictorFeatures(layout, dataset[i].past,
                                        dataset[i].observable);
    frames[i] = CanonicalFrame::Of(dataset[i].observable);
  }

  PredictorTrainResult result;
  PredictorModel& model = result.model;
  model = CreatePredictor(layout, num_heads, options.trunk_hidden,
                          options.train.seed);
  AdamW trunk_opt(model.trunk, options.train.adam);
  std::vector<AdamW> head_opts;
  for (const MlpModel& h : model.heads) {
    head_opts.emplace_back(h, options.train.adam);
  }

  std::mt19937_64 rng(options.train.seed);
  const int batch = std::min(options.train.batch_size, n);
  const int steps_per_epoch = (n + batch - 1) / batch;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t cursor = perm.size();

  const bool apply_emloco = locoval != nullptr && options.alpha > 0.0;
  const double inv_k = 1.0 / num_heads;
  Eigen::MatrixXd xb(layout.InputSize(), batch);
  std::vector<int> idx(batch);
  ForwardTape trunk_tape;
  std::vector<ForwardTape> head_tapes(num_heads);
  std::vector<Eigen::MatrixXd> head_out(num_heads);
  std::vector<Eigen::MatrixXd> head_grad(num_heads);
  double sum_lt = 0.0, sum_le = 0.0;
  int epoch_batches = 0;

  for (int step = 0; step < options.train.total_steps; ++step) {
    for (int b = 0; b < batch; ++b) {
      if (cursor == perm.size()) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      idx[b] = perm[cursor++];
      xb.col(b) = features.col(idx[b]);
    }
    const Eigen::MatrixXd hidden = ForwardBatch(model.trunk, xb, &trunk_tape);
    for (int k = 0; k < num_heads; ++k) {
      head_out[k] = ForwardBatch(model.heads[k], hidden, &head_tapes[k]);
      head_grad[k] = Eigen::MatrixXd::Zero(2 * horizon, batch);
    }

    // Predicted world trajectories, pred[b * K + k].
    std::vector<Trajectory> pred(static_cast<std::size_t>(batch) * num_heads);
    for (int b = 0; b < batch; ++b) {
      const TrainingInstance& inst = dataset[idx[b]];
      for (int k = 0; k < num_heads; ++k) {
        pred[b * num_heads + k] = Integrate(head_out[k].col(b),
                                            inst.past.points.back(),
                                            frames[idx[b]], inst.past.dt);
      }
    }

    double batch_lt = 0.0;
    if (options.trajectory_loss) {
      std::vector<Vec2> point_grad(horizon);
      for (int b = 0; b < batch; ++b) {
        const Trajectory& gt = dataset[idx[b]].future;
        int best = 0;
        double best_loss = std::numeric_limits<double>::infinity();
        for (int k = 0; k < num_heads; ++k) {
          const double loss = LossMse(pred[b * num_heads + k], gt);
          if (loss < best_loss) {
            best_loss = loss;
            best = k;
          }
        }
        batch_lt += best_loss;
        const Trajectory& p = pred[b * num_heads + best];
        for (int t = 0; t < horizon; ++t) {
          point_grad[t] = (p[t] - gt[t]) / (static_cast<double>(horizon) * batch);
        }
        AccumulateDisplacementGrad(point_grad, frames[idx[b]],
                                   head_grad[best].col(b));
      }
      batch_lt /= batch;
    }

    double batch_le = std::numeric_limits<double>::quiet_NaN();
    if (locoval != nullptr) {
      const int cols = batch * num_heads;
      Eigen::MatrixXd vf(locoval->layout.InputSize(), cols);
      for (int b = 0; b < batch; ++b) {
        for (int k = 0; k < num_heads; ++k) {
          vf.col(b * num_heads + k) =
              Canonicalize(pred[b * num_heads + k], dataset[idx[b]].observable,
                           locoval->layout);
        }
      }
      ForwardTape vtape;
      const Eigen::MatrixXd scores = ForwardBatch(locoval->net, vf, &vtape);
      double le = 0.0;
      for (int c = 0; c < cols; ++c) le += EmLocoTerm(scores(0, c), options.form);
      batch_le = le * inv_k / batch;
      if (apply_emloco) {
        Eigen::MatrixXd upstream(1, cols);
        for (int c = 0; c < cols; ++c) {
          upstream(0, c) = options.alpha * inv_k / batch *
                           EmLocoSlope(scores(0, c), options.form);
        }
        const Eigen::MatrixXd dfeat =
            Backward(locoval->net, vtape, upstream, /*parameter_grads=*/false)
                .input_grad;
        for (int b = 0; b < batch; ++b) {
          for (int k = 0; k < num_heads; ++k) {
            const std::vector<Vec2> g =
                TrajectoryGradient(locoval->layout, frames[idx[b]],
                                   dfeat.col(b * num_heads + k));
            AccumulateDisplacementGrad(g, frames[idx[b]], head_grad[k].col(b));
          }
        }
      }
    }

    const double lr = ScheduledLr(options.train, step);
    Eigen::MatrixXd trunk_upstream = Eigen::MatrixXd::Zero(hidden.rows(), batch);
    for (int k = 0; k < num_heads; ++k) {
      const BackwardResult back =
          Backward(model.heads[k], head_tapes[k], head_grad[k]);
      trunk_upstream += back.input_grad;
      head_opts[k].Step(model.heads[k], back.grads, lr,
                        options.train.weight_decay, step + 1);
    }
    const BackwardResult trunk_back =
        Backward(model.trunk, trunk_tape, trunk_upstream);
    trunk_opt.Step(model.trunk, trunk_back.grads, lr,
                   options.train.weight_decay, step + 1);

    sum_lt += batch_lt;
    sum_le += batch_le;
    ++epoch_batches;
    if ((step + 1) % steps_per_epoch == 0 ||
        step + 1 == options.train.total_steps) {
      PredictorEpochLog entry;
      entry.epoch = static_cast<int>(result.log.size()) + 1;
      entry.trajectory_loss = sum_lt / epoch_batches;
      entry.emloco_loss = sum_le / epoch_batches;
      const double weighted = options.alpha * entry.emloco_loss;
      entry.ratio = entry.trajectory_loss > 0.0
                        ? weighted / entry.trajectory_loss
                        : std::numeric_limits<double>::quiet_NaN();
      entry.warning = options.trajectory_loss && weighted > entry.trajectory_loss;
      result.log.push_back(entry);
      sum_lt = 0.0;
      sum_le = 0.0;
      epoch_batches = 0;
    }
  }
  return result;
}

nlohmann::json ToJson(const PredictorModel& model, double alpha,
                      const std::string& locoval_checksum,
                      const TrainConfig* train_config) {
  nlohmann::json heads = nlohmann::json::array();
  for (const MlpModel& h : model.heads) heads.push_back(ToJson(h));
  return {{"schema_version", 1},
          {"trunk", ToJson(model.trunk)},
          {"heads", heads},
          {"K", model.num_heads()},
          {"T_p", model.layout.past_length},
          {"T_f", model.layout.horizon},
          {"include_pose", model.layout.include_pose},
          {"num_joints", model.layout.num_joints},
          {"alpha", alpha},
          {"locoval_checksum", locoval_checksum},
          {"train_config", train_config != nullptr ? ToJson(*train_config)
                                                   : nlohmann::json(nullptr)}};
}

PredictorModel PredictorFromJson(const nlohmann::json& j) {
  PredictorModel model;
  try {
    model.layout.past_length = j.at("T_p").get<int>();
    model.layout.horizon = j.at("T_f").get<int>();
    model.layout.include_pose = j.at("include_pose").get<bool>();
    model.layout.num_joints = j.at("num_joints").get<int>();
    model.trunk = MlpFromJson(j.at("trunk"));
    for (const nlohmann::json& h : j.at("heads")) {
      model.heads.push_back(MlpFromJson(h));
    }
    if (j.at("K").get<int>() != model.num_heads()) {
      throw InputError("checkpoint K does not match its heads");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed predictor checkpoint: ") + e.what());
  }
  model.layout.Validate();
  if (model.trunk.input_size() != model.layout.InputSize()) {
    throw InputError("predictor trunk does not match its layout");
  }
  for (const MlpModel& h : model.heads) {
    if (h.input_size() != model.trunk.output_size() ||
        h.output_size() != 2 * model.layout.horizon) {
      throw InputError("predictor head does not match the trunk");
    }
  }
  return model;
}

}  // namespace emloco
