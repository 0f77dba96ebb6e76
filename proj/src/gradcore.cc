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

#include <algorithm>
#include <cmath>
#include <limits>

#include "emloco/error.h"
#include "emloco/geometry.h"

namespace emloco {
namespace {

constexpr int kSchemaVersion = 1;

void ApplyActivation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::kSigmoid:
      z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      break;
  }
}

// Derivative of the activation expressed through its output.
Eigen::MatrixXd ActivationSlope(Activation a, const Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::kIdentity:
      return Eigen::MatrixXd::Ones(out.rows(), out.cols());
    case Activation::kRelu:
      return (out.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::kSigmoid:
      return (out.array() * (1.0 - out.array())).matrix();
  }
  return {};
}

Activation LayerActivation(const MlpModel& model, int layer) {
  return layer + 1 == model.num_layers() ? model.output_activation
                                         : model.hidden_activation;
}

}  // namespace

std::string ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

Activation ParseActivation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string ScheduleName(Schedule s) {
  return s == Schedule::kCosine ? "cosine" : "constant";
}

Schedule ParseSchedule(const std::string& name) {
  if (name == "cosine") return Schedule::kCosine;
  if (name == "constant") return Schedule::kConstant;
  throw ConfigError("unknown schedule '" + name + "'");
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (min_learning_rate < 0.0 || min_learning_rate > learning_rate) {
    throw ConfigError("min_learning_rate must lie in [0, learning_rate]");
  }
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

nlohmann::json ToJson(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"min_learning_rate", c.min_learning_rate},
          {"weight_decay", c.weight_decay},
          {"total_steps", c.total_steps},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"schedule", ScheduleName(c.schedule)},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_epsilon", c.adam.epsilon}};
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.min_learning_rate = j.value("min_learning_rate", c.min_learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.schedule = ParseSchedule(j.value("schedule", ScheduleName(c.schedule)));
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.epsilon = j.value("adam_epsilon", c.adam.epsilon);
  return c;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

MlpModel MlpModel::Create(std::vector<int> layer_sizes, Activation hidden,
                          Activation output, std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw InputError("an MLP needs at least an input and an output layer");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw InputError("layer sizes must be positive");
  }
  MlpModel m;
  m.layer_sizes = std::move(layer_sizes);
  m.hidden_activation = hidden;
  m.output_activation = output;
  m.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const int fan_in = m.layer_sizes[l];
    const int fan_out = m.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return m;
}

void MlpModel::Validate() const {
  if (layer_sizes.size() < 2 ||
      weights.size() + 1 != layer_sizes.size() ||
      biases.size() != weights.size()) {
    throw InputError("MLP layer count does not match its parameters");
  }
  for (int l = 0; l < num_layers(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] ||
        weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw InputError("MLP layer " + std::to_string(l) +
                       " has mismatched parameter shapes");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw NumericError("non-finite parameters", l);
    }
  }
}

std::vector<double> MlpModel::FlatParameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (int l = 0; l < num_layers(); ++l) {
    for (int r = 0; r < weights[l].rows(); ++r) {
      for (int c = 0; c < weights[l].cols(); ++c) {
        flat.push_back(weights[l](r, c));
      }
    }
    for (int r = 0; r < biases[l].size(); ++r) flat.push_back(biases[l](r));
  }
  return flat;
}

void MlpModel::SetFlatParameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw InputError("expected " + std::to_string(parameter_count()) +
                     " parameters, got " + std::to_string(flat.size()));
  }
  std::size_t i = 0;
  for (int l = 0; l < num_layers(); ++l) {
    for (int r = 0; r < weights[l].rows(); ++r) {
      for (int c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = flat[i++];
    }
    for (int r = 0; r < biases[l].size(); ++r) biases[l](r) = flat[i++];
  }
}

MlpGradients MlpGradients::ZerosLike(const MlpModel& model) {
  MlpGradients g;
  for (int l = 0; l < model.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                              model.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(model.biases[l].size()));
  }
  return g;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

MlpGradients& MlpGradients::operator*=(double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= scale;
    biases[l] *= scale;
  }
  return *this;
}

std::vector<double> MlpGradients::Flat() const {
  std::vector<double> flat;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (int r = 0; r < weights[l].rows(); ++r) {
      for (int c = 0; c < weights[l].cols(); ++c) {
        flat.push_back(weights[l](r, c));
      }
    }
    for (int r = 0; r < biases[l].size(); ++r) flat.push_back(biases[l](r));
  }
  return flat;
}

bool MlpGradients::AllZero() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].isZero(0.0) || !biases[l].isZero(0.0)) return false;
  }
  return true;
}

Eigen::VectorXd Forward(const MlpModel& model, const Eigen::VectorXd& input) {
  return ForwardBatch(model, input).col(0);
}

Eigen::MatrixXd ForwardBatch(const MlpModel& model,
                             const Eigen::MatrixXd& inputs, ForwardTape* tape) {
  if (inputs.rows() != model.input_size()) {
    throw InputError("network expects input size " +
                     std::to_string(model.input_size()) + ", got " +
                     std::to_string(inputs.rows()));
  }
  if (tape != nullptr) {
    tape->activations.clear();
    tape->activations.push_back(inputs);
  }
  Eigen::MatrixXd x = inputs;
  for (int l = 0; l < model.num_layers(); ++l) {
    Eigen::MatrixXd z = model.weights[l] * x;
    z.colwise() += model.biases[l];
    ApplyActivation(LayerActivation(model, l), z);
    x = std::move(z);
    if (tape != nullptr) tape->activations.push_back(x);
  }
  return x;
}

BackwardResult Backward(const MlpModel& model, const ForwardTape& tape,
                        const Eigen::MatrixXd& upstream,
                        bool parameter_grads) {
  const int layers = model.num_layers();
  if (static_cast<int>(tape.activations.size()) != layers + 1) {
    throw InputError("forward tape does not match the model");
  }
  if (upstream.rows() != model.output_size() ||
      upstream.cols() != tape.activations.back().cols()) {
    throw InputError("upstream gradient shape does not match the output");
  }
  BackwardResult result;
  if (parameter_grads) result.grads = MlpGradients::ZerosLike(model);
  Eigen::MatrixXd delta = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    delta.array() *=
        ActivationSlope(LayerActivation(model, l), tape.activations[l + 1])
            .array();
    if (parameter_grads) {
      result.grads.weights[l].noalias() =
          delta * tape.activations[l].transpose();
      result.grads.biases[l] = delta.rowwise().sum();
      if (!result.grads.weights[l].allFinite() ||
          !result.grads.biases[l].allFinite()) {
        throw NumericError("non-finite gradient", l);
      }
    }
    Eigen::MatrixXd next = model.weights[l].transpose() * delta;
    if (!next.allFinite()) throw NumericError("non-finite gradient", l);
    delta = std::move(next);
  }
  result.input_grad = std::move(delta);
  return result;
}

BackwardResult Backward(const MlpModel& model, const Eigen::VectorXd& input,
                        const Eigen::VectorXd& upstream) {
  ForwardTape tape;
  ForwardBatch(model, input, &tape);
  return Backward(model, tape, upstream);
}

AdamW::AdamW(const MlpModel& model, AdamWParams params)
    : params_(params),
      first_moment_(MlpGradients::ZerosLike(model)),
      second_moment_(MlpGradients::ZerosLike(model)) {}

void AdamW::Step(MlpModel& model, const MlpGradients& grads,
                 double learning_rate, double weight_decay, int step_index) {
  if (step_index < 1) throw InputError("AdamW step_index is 1-based");
  const double b1 = params_.beta1;
  const double b2 = params_.beta2;
  const double c1 = 1.0 - std::pow(b1, step_index);
  const double c2 = 1.0 - std::pow(b2, step_index);
  const double shrink = 1.0 - learning_rate * weight_decay;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    if (weight_decay != 0.0) param *= shrink;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + params_.epsilon);
  };
  for (int l = 0; l < model.num_layers(); ++l) {
    update(model.weights[l], grads.weights[l], first_moment_.weights[l],
           second_moment_.weights[l]);
    update(model.biases[l], grads.biases[l], first_moment_.biases[l],
           second_moment_.biases[l]);
    if (!model.weights[l].allFinite() || !model.biases[l].allFinite()) {
      throw NumericError("optimizer produced non-finite parameters", l);
    }
  }
}

double CosineLr(double base_lr, int step, int total_steps, double min_lr) {
  if (step >= total_steps) return min_lr;
  if (step <= 0) return base_lr;
  const double progress = static_cast<double>(step) / total_steps;
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(kPi * progress));
}

double ScheduledLr(const TrainConfig& config, int step) {
  if (config.schedule == Schedule::kConstant) return config.learning_rate;
  return CosineLr(config.learning_rate, step, config.total_steps,
                  config.min_learning_rate);
}

GradCheckReport GradCheck(const MlpModel& model, const LossFn& loss,
                          const Eigen::VectorXd& input, double epsilon,
                          double tolerance, double abs_floor) {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
  Eigen::VectorXd grad_out;
  loss(Forward(model, input), &grad_out);
  const std::vector<double> analytic =
      Backward(model, input, grad_out).grads.Flat();

  MlpModel probe = model;
  std::vector<double> params = model.FlatParameters();
  GradCheckReport report;
  report.num_parameters = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    probe.SetFlatParameters(params);
    const double up = loss(Forward(probe, input), nullptr);
    params[i] = saved - epsilon;
    probe.SetFlatParameters(params);
    const double down = loss(Forward(probe, input), nullptr);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), abs_floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = i;
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

double MinReluMargin(const MlpModel& model, const Eigen::VectorXd& input) {
  double margin = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x = input;
  for (int l = 0; l < model.num_layers(); ++l) {
    Eigen::VectorXd z = model.weights[l] * x + model.biases[l];
    const Activation a = LayerActivation(model, l);
    if (a == Activation::kRelu) {
      margin = std::min(margin, z.cwiseAbs().minCoeff());
    }
    Eigen::MatrixXd zm = z;
    ApplyActivation(a, zm);
    x = zm.col(0);
  }
  return margin;
}

Eigen::VectorXd NudgeAwayFromKinks(const MlpModel& model,
                                   Eigen::VectorXd input, double margin,
                                   std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 1e-2);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    if (MinReluMargin(model, input) >= margin) return input;
    for (int i = 0; i < input.size(); ++i) input(i) += jitter(rng);
  }
  throw NumericError("could not move input away from relu kinks");
}

nlohmann::json ToJson(const MlpModel& model, const TrainConfig* train_config) {
  nlohmann::json j = {
      {"schema_version", kSchemaVersion},
      {"layer_sizes", model.layer_sizes},
      {"activations",
       {{"hidden", ActivationName(model.hidden_activation)},
        {"output", ActivationName(model.output_activation)}}},
      {"parameters", model.FlatParameters()},
      {"seed", model.seed},
  };
  j["train_config"] =
      train_config != nullptr ? ToJson(*train_config) : nlohmann::json(nullptr);
  return j;
}

MlpModel MlpFromJson(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw InputError("unsupported checkpoint schema_version");
    }
    MlpModel m = MlpModel::Create(
        j.at("layer_sizes").get<std::vector<int>>(),
        ParseActivation(j.at("activations").at("hidden").get<std::string>()),
        ParseActivation(j.at("activations").at("output").get<std::string>()),
        j.value("seed", std::uint64_t{0}));
    m.SetFlatParameters(j.at("parameters").get<std::vector<double>>());
    m.Validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model checkpoint: ") + e.what());
  }
}

}  // namespace emloco
