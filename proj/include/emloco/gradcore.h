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

#ifndef EMLOCO_GRADCORE_H_
#define EMLOCO_GRADCORE_H_

// Minimal differentiable layer: dense feed-forward networks with explicit
// backpropagation, AdamW, a cosine learning-rate schedule and a
// finite-difference gradient checker. Everything is double precision.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace emloco {

enum class Activation { kIdentity, kRelu, kTanh, kSigmoid };

std::string ActivationName(Activation a);
Activation ParseActivation(const std::string& name);

enum class Schedule { kConstant, kCosine };

std::string ScheduleName(Schedule s);
Schedule ParseSchedule(const std::string& name);

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double min_learning_rate = 0.0;
  double weight_decay = 0.0;
  int total_steps = 1000;
  int batch_size = 32;
  std::uint64_t seed = 0;
  Schedule schedule = Schedule::kCosine;
  AdamWParams adam;

  // Throws ConfigError on learning_rate <= 0, total_steps < 1, batch_size < 1
  // or negative weight decay.
  void Validate() const;
};

nlohmann::json ToJson(const TrainConfig& config);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);

// Dense network. weights[l] maps layer l (size layer_sizes[l]) to layer l+1.
struct MlpModel {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation hidden_activation = Activation::kRelu;
  Activation output_activation = Activation::kIdentity;
  std::uint64_t seed = 0;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;

  // Glorot-uniform weights and zero biases drawn from `seed`.
  static MlpModel Create(std::vector<int> layer_sizes, Activation hidden,
                         Activation output, std::uint64_t seed);

  // Throws InputError on shape mismatches, NumericError on non-finite values.
  void Validate() const;

  // Parameters flattened layer by layer: W row-major, then b.
  std::vector<double> FlatParameters() const;
  void SetFlatParameters(const std::vector<double>& flat);
};

// Same shapes as the parameters of a model.
struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGradients ZerosLike(const MlpModel& model);
  MlpGradients& operator+=(const MlpGradients& other);
  MlpGradients& operator*=(double scale);
  std::vector<double> Flat() const;
  bool AllZero() const;
};

// Post-activation values of every layer for one batch (columns = samples);
// activations[0] is the input.
struct ForwardTape {
  std::vector<Eigen::MatrixXd> activations;
};

Eigen::VectorXd Forward(const MlpModel& model, const Eigen::VectorXd& input);
Eigen::MatrixXd ForwardBatch(const MlpModel& model,
                             const Eigen::MatrixXd& inputs,
                             ForwardTape* tape = nullptr);

struct BackwardResult {
  MlpGradients grads;  // summed over the batch; empty if not requested
  Eigen::MatrixXd input_grad;
};

// Backpropagates `upstream` (d loss / d output, one column per sample)
// through the recorded tape. Throws NumericError with the layer index when a
// gradient becomes non-finite.
BackwardResult Backward(const MlpModel& model, const ForwardTape& tape,
                        const Eigen::MatrixXd& upstream,
                        bool parameter_grads = true);

// Single-sample convenience that recomputes the forward pass.
BackwardResult Backward(const MlpModel& model, const Eigen::VectorXd& input,
                        const Eigen::VectorXd& upstream);

// Decoupled-weight-decay Adam. Moments persist across Step() calls.
class AdamW {
 public:
  AdamW(const MlpModel& model, AdamWParams params = {});

  // step_index is 1-based.
  void Step(MlpModel& model, const MlpGradients& grads, double learning_rate,
            double weight_decay, int step_index);

 private:
  AdamWParams params_;
  MlpGradients first_moment_;
  MlpGradients second_moment_;
};

// min_lr + (base_lr - min_lr) * (1 + cos(pi * step / total)) / 2, clamped to
// min_lr past the end.
double CosineLr(double base_lr, int step, int total_steps, double min_lr);

// Learning rate at 0-based `step` under the configured schedule.
double ScheduledLr(const TrainConfig& config, int step);

// Scalar loss of a network output. Fills `grad_output` with d loss / d output.
using LossFn =
    std::function<double(const Eigen::VectorXd& output,
                         Eigen::VectorXd* grad_output)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t num_parameters = 0;
  bool passed = false;
};

// Compares Backward() against central differences for every parameter.
// Relative error is |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport GradCheck(const MlpModel& model, const LossFn& loss,
                          const Eigen::VectorXd& input, double epsilon,
                          double tolerance, double abs_floor = 1e-6);

// Smallest |pre-activation| over all relu units for `input`; +inf when the
// model has none.
double MinReluMargin(const MlpModel& model, const Eigen::VectorXd& input);

// Jitters `input` until every relu pre-activation is at least `margin` away
// from its kink, so finite differences never straddle it.
Eigen::VectorXd NudgeAwayFromKinks(const MlpModel& model,
                                   Eigen::VectorXd input, double margin,
                                   std::mt19937_64& rng);

// Checkpoint document: {schema_version, layer_sizes, activations,
// parameters, seed, train_config}.
nlohmann::json ToJson(const MlpModel& model,
                      const TrainConfig* train_config = nullptr);
MlpModel MlpFromJson(const nlohmann::json& j);

}  // namespace emloco

#endif  // EMLOCO_GRADCORE_H_
