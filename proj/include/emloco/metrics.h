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

#ifndef EMLOCO_METRICS_H_
#define EMLOCO_METRICS_H_

// Displacement errors, min-of-K variants, chi-square distances between
// distributions of physics primitives, per-timestep errors and
// plausibility-binned summaries.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emloco/geometry.h"

namespace emloco {

// K candidate futures for one case.
struct PredictionSet {
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
};

double Ade(const Trajectory& pred, const Trajectory& gt);
double Fde(const Trajectory& pred, const Trajectory& gt);

using TrajectoryMetric = double (*)(const Trajectory&, const Trajectory&);

// min over heads of metric(head, gt). Throws InputError for an empty set.
double MinOverHeads(TrajectoryMetric metric, const PredictionSet& preds,
                    const Trajectory& gt);

struct PhysicsPrimitives {
  std::vector<double> speed;
  std::vector<double> acceleration;
  std::vector<double> angular_velocity;
  std::vector<double> angular_acceleration;
};

enum Primitive : int {
  kVelocity = 0,
  kAcceleration,
  kAngularVelocity,
  kAngularAcceleration,
};
inline constexpr std::array<const char*, 4> kPrimitiveNames = {
    "velocity", "acceleration", "angular_velocity", "angular_acceleration"};

// Needs at least four points. Steps shorter than 1e-6 m keep the previous
// heading; a leading still prefix takes the first defined heading.
PhysicsPrimitives ComputePrimitives(const Trajectory& traj);
const std::vector<double>& PrimitiveSeries(const PhysicsPrimitives& p,
                                           Primitive which);

struct HistogramSpec {
  int n_bins = 50;
  double lo = 0.0;
  double hi = 1.0;

  void Validate() const;
  // Range of `samples` widened by `margin` of its span on each side.
  static HistogramSpec FromSamples(std::span<const double> samples, int n_bins,
                                   double margin = 0.05);
};

// Normalized histogram; samples outside [lo, hi] land in the edge bins.
std::vector<double> NormalizedHistogram(std::span<const double> samples,
                                        const HistogramSpec& spec);

// sum_b (p_b - q_b)^2 / (p_b + q_b) with 0/0 terms taken as 0.
double Chi2Distance(std::span<const double> pred_samples,
                    std::span<const double> gt_samples,
                    const HistogramSpec& spec);

struct Chi2Report {
  double velocity = 0.0;
  double acceleration = 0.0;
  double angular_velocity = 0.0;
  double angular_acceleration = 0.0;

  double& operator[](int i);
  double operator[](int i) const;
};

struct EvalCase {
  PredictionSet predictions;
  Trajectory gt;
};

struct MetricsReport {
  double ade = 0.0;  // mean over every (case, head) trajectory
  double fde = 0.0;
  double min_ade = 0.0;  // mean over cases of the per-case minimum
  double min_fde = 0.0;
  Chi2Report chi2;
  std::array<HistogramSpec, 4> chi2_specs;
  std::vector<double> per_timestep;  // mean displacement error per frame
  std::size_t n_samples = 0;
  std::size_t n_trajectories = 0;
};

// Aggregates the report. Chi-square bins come from the ground-truth samples
// unless `specs` is given.
MetricsReport Evaluate(std::span<const EvalCase> cases, int chi2_bins = 50,
                       const std::array<HistogramSpec, 4>* specs = nullptr);

struct ScoredError {
  double score = 0.0;
  double ade = 0.0;
};

struct PlausibilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_ade = 0.0;  // 0 for empty bins
};

// Uniform bins over [0, 1]; a score of exactly 1 falls in the last bin.
std::vector<PlausibilityBin> BinByPlausibility(
    std::span<const ScoredError> items, int n_bins);

// Spearman correlation between bin index and mean ADE over non-empty bins.
double BinTrend(std::span<const PlausibilityBin> bins);

double PearsonCorrelation(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks.
double SpearmanCorrelation(std::span<const double> x,
                           std::span<const double> y);

nlohmann::json ToJson(const MetricsReport& report);
void WritePerTimestepCsv(std::ostream& out, const MetricsReport& report);
void WriteBinsCsv(std::ostream& out, std::span<const PlausibilityBin> bins);

}  // namespace emloco

#endif  // EMLOCO_METRICS_H_
