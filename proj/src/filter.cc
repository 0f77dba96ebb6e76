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

#include "emloco/filter.h"

#include <algorithm>

#include "emloco/error.h"

namespace emloco {
namespace {

void CheckLambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw InputError("lambda must lie in [0, 1]");
  }
}

nlohmann::json Entries(const std::vector<ScoredCandidate>& entries) {
  nlohmann::json out = nlohmann::json::array();
  for (const ScoredCandidate& c : entries) {
    out.push_back({{"head", c.head}, {"score", c.score}});
  }
  return out;
}

}  // namespace

FilterResult FilterByScores(const PredictionSet& candidates,
                            std::span<const double> scores, double lambda) {
  if (candidates.trajectories.empty()) {
    throw InputError("filter needs at least one candidate");
  }
  if (scores.size() != candidates.size()) {
    throw InputError("one score per candidate is required");
  }
  CheckLambda(lambda);
  FilterResult result;
  result.lambda = lambda;
  const bool any_pass = std::any_of(scores.begin(), scores.end(),
                                    [lambda](double s) { return s >= lambda; });
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  result.fallback_used = !any_pass;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    ScoredCandidate c{static_cast<int>(k), candidates.trajectories[k],
                      scores[k]};
    const bool keep = any_pass ? scores[k] >= lambda : k == best;
    (keep ? result.kept : result.rejected).push_back(std::move(c));
  }
  return result;
}

FilterResult LocoValFilter(const LocoValModel& locoval,
                           const PredictionSet& candidates,
                           const ObservableState& obs, double lambda) {
  if (candidates.trajectories.empty()) {
    throw InputError("filter needs at least one candidate");
  }
  const std::vector<double> scores =
      ScoreBatch(locoval, candidates.trajectories, obs);
  return FilterByScores(candidates, scores, lambda);
}

nlohmann::json ToJson(const FilterResult& result) {
  return {{"lambda", result.lambda},
          {"kept", Entries(result.kept)},
          {"rejected", Entries(result.rejected)},
          {"fallback_used", result.fallback_used}};
}

std::vector<SweepRow> SweepLambda(const LocoValModel& locoval,
                                  std::span<const TrainingInstance> eval_set,
                                  const PredictorModel& predictor,
                                  std::span<const double> lambdas,
                                  int chi2_bins) {
  for (double l : lambdas) CheckLambda(l);
  if (eval_set.empty()) throw InputError("empty evaluation set");
  std::vector<PredictionSet> preds;
  std::vector<std::vector<double>> scores;
  std::vector<EvalCase> all;
  for (const TrainingInstance& inst : eval_set) {
    preds.push_back(Predict(predictor, inst.past, inst.observable));
    scores.push_back(
        ScoreBatch(locoval, preds.back().trajectories, inst.observable));
    all.push_back({preds.back(), inst.future});
  }
  const MetricsReport reference = Evaluate(all, chi2_bins);

  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    SweepRow row;
    row.lambda = lambda;
    std::vector<EvalCase> kept, rejected;
    std::size_t n_rejected = 0, n_total = 0;
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      const FilterResult f = FilterByScores(preds[i], scores[i], lambda);
      row.fallback_cases += f.fallback_used ? 1 : 0;
      n_total += preds[i].size();
      n_rejected += f.rejected.size();
      EvalCase k{{}, eval_set[i].future};
      for (const ScoredCandidate& c : f.kept) {
        k.predictions.trajectories.push_back(c.trajectory);
      }
      kept.push_back(std::move(k));
      if (!f.rejected.empty()) {
        EvalCase r{{}, eval_set[i].future};
        for (const ScoredCandidate& c : f.rejected) {
          r.predictions.trajectories.push_back(c.trajectory);
        }
        rejected.push_back(std::move(r));
      }
    }
    row.kept = Evaluate(kept, chi2_bins, &reference.chi2_specs);
    if (!rejected.empty()) {
      row.rejected = Evaluate(rejected, chi2_bins, &reference.chi2_specs);
    }
    row.rejection_rate =
        static_cast<double>(n_rejected) / static_cast<double>(n_total);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json ToJson(const SweepRow& row) {
  return {{"lambda", row.lambda},
          {"kept", ToJson(row.kept)},
          {"rejected", row.rejected ? ToJson(*row.rejected)
                                    : nlohmann::json(nullptr)},
          {"rejection_rate", row.rejection_rate},
          {"fallback_cases", row.fallback_cases}};
}

}  // namespace emloco
