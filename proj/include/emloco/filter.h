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

#ifndef EMLOCO_FILTER_H_
#define EMLOCO_FILTER_H_

// Threshold filter over candidate futures: keep every candidate whose
// surrogate score reaches lambda, or the single best one when none does.

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "emloco/locoval.h"
#include "emloco/metrics.h"
#include "emloco/predictor.h"

namespace emloco {

inline constexpr double kDefaultLambda = 0.7;

struct ScoredCandidate {
  int head = 0;
  Trajectory trajectory;
  double score = 0.0;
};

struct FilterResult {
  double lambda = 0.0;
  std::vector<ScoredCandidate> kept;
  std::vector<ScoredCandidate> rejected;
  bool fallback_used = false;
};

// Applies the threshold rule to precomputed scores (ties in the fallback go
// to the lowest index).
FilterResult FilterByScores(const PredictionSet& candidates,
                            std::span<const double> scores, double lambda);

FilterResult LocoValFilter(const LocoValModel& locoval,
                           const PredictionSet& candidates,
                           const ObservableState& obs, double lambda);

nlohmann::json ToJson(const FilterResult& result);

struct SweepRow {
  double lambda = 0.0;
  MetricsReport kept;
  std::optional<MetricsReport> rejected;  // empty when nothing was rejected
  double rejection_rate = 0.0;            // rejected / all candidates
  std::size_t fallback_cases = 0;
};

// Predicts every instance once, then filters at each lambda. Chi-square bins
// are fixed from the unfiltered ground truth so rows are comparable.
std::vector<SweepRow> SweepLambda(const LocoValModel& locoval,
                                  std::span<const TrainingInstance> eval_set,
                                  const PredictorModel& predictor,
                                  std::span<const double> lambdas,
                                  int chi2_bins = 50);

nlohmann::json ToJson(const SweepRow& row);

}  // namespace emloco

#endif  // EMLOCO_FILTER_H_
