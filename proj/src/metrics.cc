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

#include "emloco/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include "emloco/error.h"

namespace emloco {
namespace {

constexpr double kStillStep = 1e-6;

void CheckPair(const Trajectory& pred, const Trajectory& gt) {
  if (pred.size() != gt.size()) {
    throw InputError("prediction has " + std::to_string(pred.size()) +
                     " points, ground truth " + std::to_string(gt.size()));
  }
  if (gt.empty()) throw InputError("trajectories are empty");
}

std::vector<double> AverageRanks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double Ade(const Trajectory& pred, const Trajectory& gt) {
  CheckPair(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) sum += (pred[t] - gt[t]).norm();
  return sum / static_cast<double>(gt.size());
}

double Fde(const Trajectory& pred, const Trajectory& gt) {
  CheckPair(pred, gt);
  return (pred.points.back() - gt.points.back()).norm();
}

double MinOverHeads(TrajectoryMetric metric, const PredictionSet& preds,
                    const Trajectory& gt) {
  if (preds.trajectories.empty()) throw InputError("prediction set is empty");
  double best = std::numeric_limits<double>::infinity();
  for (const Trajectory& p : preds.trajectories) {
    best = std::min(best, metric(p, gt));
  }
  return best;
}

PhysicsPrimitives ComputePrimitives(const Trajectory& traj) {
  traj.Validate(4);
  const double dt = traj.dt;
  const std::size_t steps = traj.size() - 1;
  PhysicsPrimitives out;
  std::vector<double> heading(steps);
  std::vector<bool> defined(steps, false);
  for (std::size_t t = 0; t < steps; ++t) {
    const Vec2 d = traj[t + 1] - traj[t];
    const double len = d.norm();
    out.speed.push_back(len / dt);
    if (len >= kStillStep) {
      heading[t] = std::atan2(d.y(), d.x());
      defined[t] = true;
    } else if (t > 0) {
      heading[t] = heading[t - 1];
      defined[t] = defined[t - 1];
    }
  }
  const auto first = std::find(defined.begin(), defined.end(), true);
  const double lead =
      first == defined.end() ? 0.0 : heading[first - defined.begin()];
  for (std::size_t t = 0; t < steps && !defined[t]; ++t) heading[t] = lead;

  for (std::size_t t = 0; t + 1 < steps; ++t) {
    out.acceleration.push_back((out.speed[t + 1] - out.speed[t]) / dt);
    out.angular_velocity.push_back(WrapAngle(heading[t + 1] - heading[t]) / dt);
  }
  for (std::size_t t = 0; t + 1 < out.angular_velocity.size(); ++t) {
    out.angular_acceleration.push_back(
        (out.angular_velocity[t + 1] - out.angular_velocity[t]) / dt);
  }
  return out;
}

const std::vector<double>& PrimitiveSeries(const PhysicsPrimitives& p,
                                           Primitive which) {
  switch (which) {
    case kVelocity: return p.speed;
    case kAcceleration: return p.acceleration;
    case kAngularVelocity: return p.angular_velocity;
    case kAngularAcceleration: return p.angular_acceleration;
  }
  return p.speed;
}

void HistogramSpec::Validate() const {
  if (n_bins < 2) throw InputError("histograms need at least two bins");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InputError("histogram range must satisfy lo < hi");
  }
}

HistogramSpec HistogramSpec::FromSamples(std::span<const double> samples,
                                         int n_bins, double margin) {
  if (samples.empty()) throw InputError("no samples to derive a range from");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  double lo = *mn;
  double hi = *mx;
  double pad = margin * (hi - lo);
  if (!(pad > 0.0)) pad = std::max(1e-3, 1e-3 * std::abs(lo));
  lo -= pad;
  hi += pad;
  HistogramSpec spec{n_bins, lo, hi};
  spec.Validate();
  return spec;
}

std::vector<double> NormalizedHistogram(std::span<const double> samples,
                                        const HistogramSpec& spec) {
  spec.Validate();
  if (samples.empty()) throw InputError("histogram of an empty sample set");
  std::vector<double> hist(spec.n_bins, 0.0);
  const double width = (spec.hi - spec.lo) / spec.n_bins;
  for (double s : samples) {
    const double pos = std::floor((s - spec.lo) / width);
    const int bin = static_cast<int>(
        std::clamp(pos, 0.0, static_cast<double>(spec.n_bins - 1)));
    hist[bin] += 1.0;
  }
  for (double& h : hist) h /= static_cast<double>(samples.size());
  return hist;
}

double Chi2Distance(std::span<const double> pred_samples,
                    std::span<const double> gt_samples,
                    const HistogramSpec& spec) {
  const std::vector<double> p = NormalizedHistogram(pred_samples, spec);
  const std::vector<double> q = NormalizedHistogram(gt_samples, spec);
  double chi2 = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    const double total = p[b] + q[b];
    if (total > 0.0) chi2 += (p[b] - q[b]) * (p[b] - q[b]) / total;
  }
  return chi2;
}

double& Chi2Report::operator[](int i) {
  switch (i) {
    case kVelocity: return velocity;
    case kAcceleration: return acceleration;
    case kAngularVelocity: return angular_velocity;
    default: return angular_acceleration;
  }
}

double Chi2Report::operator[](int i) const {
  return const_cast<Chi2Report&>(*this)[i];
}

MetricsReport Evaluate(std::span<const EvalCase> cases, int chi2_bins,
                       const std::array<HistogramSpec, 4>* specs) {
  if (cases.empty()) throw InputError("no cases to evaluate");
  const std::size_t horizon = cases[0].gt.size();
  MetricsReport r;
  r.n_samples = cases.size();
  r.per_timestep.assign(horizon, 0.0);
  double fde_sum = 0.0;
  double min_ade_sum = 0.0;
  double min_fde_sum = 0.0;
  std::array<std::vector<double>, 4> pred_prims;
  std::array<std::vector<double>, 4> gt_prims;
  const bool with_primitives = horizon >= 4;
  for (const EvalCase& c : cases) {
    if (c.gt.size() != horizon) {
      throw InputError("evaluation cases have different horizons");
    }
    if (c.predictions.trajectories.empty()) {
      throw InputError("evaluation case without predictions");
    }
    for (const Trajectory& p : c.predictions.trajectories) {
      CheckPair(p, c.gt);
      for (std::size_t t = 0; t < horizon; ++t) {
        r.per_timestep[t] += (p[t] - c.gt[t]).norm();
      }
      fde_sum += Fde(p, c.gt);
      ++r.n_trajectories;
      if (with_primitives) {
        const PhysicsPrimitives prims = ComputePrimitives(p);
        for (int k = 0; k < 4; ++k) {
          const auto& s = PrimitiveSeries(prims, static_cast<Primitive>(k));
          pred_prims[k].insert(pred_prims[k].end(), s.begin(), s.end());
        }
      }
    }
    min_ade_sum += MinOverHeads(&Ade, c.predictions, c.gt);
    min_fde_sum += MinOverHeads(&Fde, c.predictions, c.gt);
    if (with_primitives) {
      const PhysicsPrimitives prims = ComputePrimitives(c.gt);
      for (int k = 0; k < 4; ++k) {
        const auto& s = PrimitiveSeries(prims, static_cast<Primitive>(k));
        gt_prims[k].insert(gt_prims[k].end(), s.begin(), s.end());
      }
    }
  }
  const double n_traj = static_cast<double>(r.n_trajectories);
  for (double& e : r.per_timestep) e /= n_traj;
  double ade_sum = 0.0;
  for (double e : r.per_timestep) ade_sum += e;
  r.ade = ade_sum / static_cast<double>(horizon);
  r.fde = fde_sum / n_traj;
  r.min_ade = min_ade_sum / static_cast<double>(cases.size());
  r.min_fde = min_fde_sum / static_cast<double>(cases.size());
  if (with_primitives) {
    for (int k = 0; k < 4; ++k) {
      r.chi2_specs[k] = specs != nullptr
                            ? (*specs)[k]
                            : HistogramSpec::FromSamples(gt_prims[k], chi2_bins);
      r.chi2[k] = Chi2Distance(pred_prims[k], gt_prims[k], r.chi2_specs[k]);
    }
  }
  return r;
}

std::vector<PlausibilityBin> BinByPlausibility(
    std::span<const ScoredError> items, int n_bins) {
  if (n_bins < 1) throw InputError("n_bins must be >= 1");
  std::vector<PlausibilityBin> bins(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    bins[b].lo = static_cast<double>(b) / n_bins;
    bins[b].hi = static_cast<double>(b + 1) / n_bins;
  }
  std::vector<double> sums(n_bins, 0.0);
  for (const ScoredError& item : items) {
    if (!(item.score >= 0.0 && item.score <= 1.0)) {
      throw InputError("plausibility scores must lie in [0, 1]");
    }
    const int b = std::min(n_bins - 1, static_cast<int>(item.score * n_bins));
    ++bins[b].count;
    sums[b] += item.ade;
  }
  for (int b = 0; b < n_bins; ++b) {
    if (bins[b].count > 0) bins[b].mean_ade = sums[b] / bins[b].count;
  }
  return bins;
}

double BinTrend(std::span<const PlausibilityBin> bins) {
  std::vector<double> index;
  std::vector<double> ade;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count == 0) continue;
    index.push_back(static_cast<double>(b));
    ade.push_back(bins[b].mean_ade);
  }
  return SpearmanCorrelation(index, ade);
}

double PearsonCorrelation(std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("correlation of unequal lengths");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double SpearmanCorrelation(std::span<const double> x,
                           std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("correlation of unequal lengths");
  const std::vector<double> rx = AverageRanks(x);
  const std::vector<double> ry = AverageRanks(y);
  return PearsonCorrelation(rx, ry);
}

nlohmann::json ToJson(const MetricsReport& r) {
  nlohmann::json chi2 = nlohmann::json::object();
  nlohmann::json bins = nlohmann::json::object();
  for (int k = 0; k < 4; ++k) {
    chi2[kPrimitiveNames[k]] = r.chi2[k];
    bins[kPrimitiveNames[k]] = {{"n_bins", r.chi2_specs[k].n_bins},
                                {"lo", r.chi2_specs[k].lo},
                                {"hi", r.chi2_specs[k].hi}};
  }
  return {{"ade", r.ade},
          {"fde", r.fde},
          {"min_ade", r.min_ade},
          {"min_fde", r.min_fde},
          {"chi2", chi2},
          {"chi2_bins", bins},
          {"per_timestep", r.per_timestep},
          {"n_samples", r.n_samples},
          {"n_trajectories", r.n_trajectories}};
}

void WritePerTimestepCsv(std::ostream& out, const MetricsReport& r) {
  out << "timestep,mean_displacement_error\n" << std::setprecision(17);
  for (std::size_t t = 0; t < r.per_timestep.size(); ++t) {
    out << t + 1 << ',' << r.per_timestep[t] << '\n';
  }
}

void WriteBinsCsv(std::ostream& out, std::span<const PlausibilityBin> bins) {
  out << "bin,lo,hi,count,mean_ade\n" << std::setprecision(17);
  for (std::size_t b = 0; b < bins.size(); ++b) {
    out << b << ',' << bins[b].lo << ',' << bins[b].hi << ',' << bins[b].count
        << ',' << bins[b].mean_ade << '\n';
  }
}

}  // namespace emloco
