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

#include "emloco/pipeline.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "emloco/error.h"

namespace emloco {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

fs::path OutputDir(const RunConfig& config) {
  const fs::path dir = config.ResolvedOutputDir();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() +
                  "': " + ec.message());
  }
  return dir;
}

void WriteFile(const fs::path& path,
               const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  body(out);
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void WriteJson(const fs::path& path, const Json& j) {
  WriteFile(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

Json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ParseError("'" + path.string() + "' is not valid JSON", 0);
  }
  return j;
}

fs::path EchoConfig(const RunConfig& config) {
  const fs::path dir = OutputDir(config);
  WriteJson(dir / kResolvedConfigFile, ToJson(config));
  return dir;
}

std::pair<TrajectoryDataset, TrajectoryDataset> SplitTracks(
    const RunConfig& config, const TrajectoryDataset& dataset) {
  const std::size_t n = dataset.tracks.size();
  if (n < 2) throw InputError("need at least two tracks to split");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.SubSeed("split"));
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_eval = static_cast<std::size_t>(
      std::lround(config.data.eval_fraction * static_cast<double>(n)));
  n_eval = std::clamp<std::size_t>(n_eval, 1, n - 1);
  std::vector<std::size_t> eval_idx(order.begin(), order.begin() + n_eval);
  std::vector<std::size_t> train_idx(order.begin() + n_eval, order.end());
  std::sort(eval_idx.begin(), eval_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  TrajectoryDataset train{{}, dataset.dt, dataset.source};
  TrajectoryDataset eval{{}, dataset.dt, dataset.source};
  for (std::size_t i : train_idx) train.tracks.push_back(dataset.tracks[i]);
  for (std::size_t i : eval_idx) eval.tracks.push_back(dataset.tracks[i]);
  return {std::move(train), std::move(eval)};
}

LocoValModel LoadLocoVal(const fs::path& dir) {
  return LocoValFromJson(ReadJson(dir / kLocoValFile));
}

PredictorModel LoadPredictor(const RunConfig& config, const fs::path& dir) {
  return PredictorFromJson(ReadJson(dir / config.predictor.checkpoint));
}

std::string CurvePath(const std::string& checkpoint) {
  fs::path p(checkpoint);
  return (p.parent_path() / (p.stem().string() + "_curve.csv")).string();
}

PredictorOptions OptionsFor(const RunConfig& config, double alpha) {
  PredictorOptions o;
  o.num_heads = config.predictor.num_heads;
  o.alpha = alpha;
  o.trunk_hidden = config.predictor.trunk_hidden;
  o.include_pose = config.predictor.include_pose;
  o.form = config.predictor.form;
  o.train = config.predictor.train;
  return o;
}

void WriteLossCurve(const fs::path& path,
                    std::span<const PredictorEpochLog> log) {
  WriteFile(path, [&](std::ostream& out) {
    out << "epoch,trajectory_loss,emloco_loss,ratio,warning\n"
        << std::setprecision(17);
    for (const PredictorEpochLog& e : log) {
      out << e.epoch << ',' << e.trajectory_loss << ',' << e.emloco_loss
          << ',' << e.ratio << ',' << (e.warning ? 1 : 0) << '\n';
    }
  });
}

Json BinsJson(std::span<const PlausibilityBin> bins) {
  Json out = Json::array();
  for (const PlausibilityBin& b : bins) {
    out.push_back({{"lo", b.lo},
                   {"hi", b.hi},
                   {"count", b.count},
                   {"mean_ade", b.mean_ade}});
  }
  return out;
}

Json NumberOrNull(double x) { return std::isfinite(x) ? Json(x) : Json(); }

std::vector<std::string> Tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

bool SkipLine(const std::vector<std::string>& tokens) {
  return tokens.empty() || tokens[0][0] == '#' || tokens[0] == "case_id";
}

double ToNumber(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("'" + s + "' is not a number", line);
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw ParseError("'" + s + "' is not a finite number", line);
  }
  return v;
}

int ToIndex(const std::string& s, std::size_t line) {
  const double v = ToNumber(s, line);
  if (v < 0 || std::floor(v) != v || v > 1e6) {
    throw ParseError("'" + s + "' is not an index", line);
  }
  return static_cast<int>(v);
}

}  // namespace

SplitInstances MakeSplit(const RunConfig& config,
                         const TrajectoryDataset& dataset,
                         std::span<const HumanoidState> poses) {
  auto [train, eval] = SplitTracks(config, dataset);
  SplitInstances out;
  out.train_tracks = train.tracks.size();
  out.eval_tracks = eval.tracks.size();
  const DataConfig& d = config.data;
  out.train = MakeTrainingInstances(train, poses, d.past_length, d.horizon,
                                    d.window_stride,
                                    config.SubSeed("instances.train"));
  out.eval = MakeTrainingInstances(eval, poses, d.past_length, d.horizon,
                                   d.window_stride,
                                   config.SubSeed("instances.eval"));
  if (out.train.empty() || out.eval.empty()) {
    throw InputError("tracks are too short for past_length + horizon");
  }
  return out;
}

SplitInstances LoadSplit(const RunConfig& config) {
  const fs::path dir = config.ResolvedOutputDir();
  const TrajectoryDataset dataset =
      LoadTsv((dir / kTrajectoriesFile).string(), config.data.synthetic.dt);
  const std::vector<PoseBankEntry> bank =
      PoseBankFromJson(ReadJson(dir / kPoseBankFile));
  return MakeSplit(config, dataset, States(bank));
}

GenDataSummary RunGenData(const RunConfig& config, std::ostream& log) {
  const fs::path dir = EchoConfig(config);
  const DataConfig& d = config.data;
  const TrajectoryDataset dataset =
      d.trajectories.empty()
          ? GenerateSynthetic(d.synthetic, d.n_tracks, config.SubSeed("tracks"),
                              config.oracle)
          : LoadTsv(d.trajectories, d.synthetic.dt);
  const std::vector<PoseBankEntry> bank =
      GeneratePoseBank(d.n_poses, config.SubSeed("poses"),
                       d.synthetic.speed_min, d.synthetic.speed_max);
  const std::vector<HumanoidState> poses = States(bank);

  const TrajectoryDataset train = SplitTracks(config, dataset).first;
  const std::vector<Trajectory> trajectories =
      TrajectoryBank(train, d.horizon, d.bank_stride);
  if (trajectories.empty()) {
    throw InputError("no training track is longer than the horizon");
  }
  PairStats stats;
  const std::vector<PlausibilitySample> samples = BuildPlausibilityDataset(
      poses, trajectories, d.n_plausible, d.n_implausible, config.oracle,
      config.SubSeed("pairs"), &stats);

  SaveTsv((dir / kTrajectoriesFile).string(), dataset);
  WriteJson(dir / kPoseBankFile, PoseBankToJson(bank));
  WriteFile(dir / kPlausibilityFile, [&](std::ostream& out) {
    WritePlausibilityCsv(out, samples);
  });

  GenDataSummary s;
  s.n_tracks = dataset.tracks.size();
  s.n_bank = trajectories.size();
  s.n_poses = bank.size();
  s.resampled = stats.resampled;
  double sum_p = 0.0;
  double sum_i = 0.0;
  for (const PlausibilitySample& x : samples) {
    if (x.label == PairLabel::kPlausible) {
      ++s.n_plausible;
      sum_p += x.reward;
    } else {
      ++s.n_implausible;
      sum_i += x.reward;
    }
  }
  s.mean_plausible = s.n_plausible ? sum_p / s.n_plausible : 0.0;
  s.mean_implausible = s.n_implausible ? sum_i / s.n_implausible : 0.0;
  log << "tracks " << s.n_tracks << ", bank trajectories " << s.n_bank
      << ", poses " << s.n_poses << "\n"
      << "plausible " << s.n_plausible << " mean reward " << s.mean_plausible
      << "\n"
      << "implausible " << s.n_implausible << " mean reward "
      << s.mean_implausible << "\n"
      << "reward gap " << s.mean_plausible - s.mean_implausible
      << ", resampled pairs " << s.resampled << "\n"
      << "wrote " << dir.string() << "\n";
  return s;
}

LocoValSummary RunTrainLocoVal(const RunConfig& config, std::ostream& log) {
  const fs::path dir = EchoConfig(config);
  std::ifstream in(dir / kPlausibilityFile);
  if (!in) {
    throw IoError("cannot open '" + (dir / kPlausibilityFile).string() +
                  "'; run gen-data first");
  }
  const std::vector<PlausibilitySample> samples = ReadPlausibilityCsv(in);
  if (samples.empty()) throw InputError("plausibility dataset is empty");
  if (static_cast<int>(samples.front().trajectory.size()) !=
      config.data.horizon) {
    throw ConfigError("plausibility samples do not match data.horizon");
  }

  LocoValOptions options;
  options.layout.horizon = config.data.horizon;
  options.layout.include_pose = config.locoval.include_pose;
  options.hidden = config.locoval.hidden;
  options.train = config.locoval.train;
  options.holdout_fraction = config.locoval.holdout_fraction;
  const LocoValTrainResult result = TrainLocoVal(samples, options);

  WriteJson(dir / kLocoValFile, ToJson(result.model, &config.locoval.train));
  WriteFile(dir / kLocoValCurveFile, [&](std::ostream& out) {
    out << "epoch,step,learning_rate,train_mse,holdout_mse\n"
        << std::setprecision(17);
    for (const LocoValCurvePoint& p : result.curve) {
      out << p.epoch << ',' << p.step << ',' << p.learning_rate << ','
          << p.train_mse << ',' << p.holdout_mse << '\n';
    }
  });

  LocoValSummary s;
  s.holdout_pearson = result.holdout_pearson;
  s.best_holdout_mse = result.best_holdout_mse;
  s.best_step = result.best_step;
  s.checksum = Checksum(result.model);
  log << "trained on " << result.n_train << " samples, held out "
      << result.n_holdout << "\n"
      << "best step " << s.best_step << ", held-out mse "
      << s.best_holdout_mse << "\n"
      << "held-out pearson " << s.holdout_pearson << "\n"
      << "checksum " << s.checksum << "\n";
  return s;
}

PredictorSummary RunTrainPredictor(const RunConfig& config, std::ostream& log) {
  const fs::path dir = EchoConfig(config);
  const SplitInstances split = LoadSplit(config);
  std::optional<LocoValModel> locoval;
  if (fs::exists(dir / kLocoValFile)) {
    locoval = LoadLocoVal(dir);
  } else if (config.predictor.alpha > 0.0) {
    throw IoError("'" + (dir / kLocoValFile).string() +
                  "' is missing; run train-locoval first");
  }

  const PredictorOptions options = OptionsFor(config, config.predictor.alpha);
  const PredictorTrainResult result = TrainPredictor(
      split.train, locoval ? &*locoval : nullptr, options);

  WriteJson(dir / config.predictor.checkpoint,
            ToJson(result.model, config.predictor.alpha,
                   locoval ? Checksum(*locoval) : "", &options.train));
  WriteLossCurve(dir / CurvePath(config.predictor.checkpoint), result.log);

  PredictorSummary s;
  for (const PredictorEpochLog& e : result.log) {
    if (e.warning) {
      ++s.warnings;
      log << "warning: epoch " << e.epoch << " alpha * L_E = "
          << config.predictor.alpha * e.emloco_loss << " exceeds L_T = "
          << e.trajectory_loss << "\n";
    }
  }
  if (!result.log.empty()) {
    s.trajectory_loss = result.log.back().trajectory_loss;
    s.emloco_loss = result.log.back().emloco_loss;
  }
  log << "trained " << options.num_heads << " heads on " << split.train.size()
      << " windows, alpha " << options.alpha << "\n"
      << "final L_T " << s.trajectory_loss << ", L_E " << s.emloco_loss
      << "\n"
      << "wrote " << (dir / config.predictor.checkpoint).string() << "\n";
  return s;
}

EvalSummary RunEval(const RunConfig& config, std::optional<double> lambda,
                    std::ostream& log) {
  const fs::path dir = EchoConfig(config);
  if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) {
    throw InputError("filter threshold must lie in [0, 1]");
  }
  const SplitInstances split = LoadSplit(config);
  const PredictorModel model = LoadPredictor(config, dir);
  const LocoValModel locoval = LoadLocoVal(dir);

  std::vector<EvalCase> cases;
  std::vector<std::vector<double>> scores;
  std::vector<ScoredError> scored;
  cases.reserve(split.eval.size());
  for (const TrainingInstance& inst : split.eval) {
    EvalCase c{Predict(model, inst.past, inst.observable), inst.future};
    scores.push_back(ScoreBatch(locoval, c.predictions.trajectories,
                                inst.observable));
    for (std::size_t k = 0; k < c.predictions.size(); ++k) {
      scored.push_back(
          {scores.back()[k], Ade(c.predictions.trajectories[k], c.gt)});
    }
    cases.push_back(std::move(c));
  }

  EvalSummary s;
  s.all = Evaluate(cases, config.eval.chi2_bins);
  s.bins = BinByPlausibility(scored, config.eval.plausibility_bins);
  s.bin_trend = BinTrend(s.bins);
  for (const ScoredError& e : scored) s.mean_score += e.score;
  s.mean_score /= static_cast<double>(scored.size());

  std::vector<std::vector<bool>> kept_flags;
  if (lambda) {
    FilterSummary f;
    f.lambda = *lambda;
    std::vector<EvalCase> kept;
    std::vector<EvalCase> rejected;
    std::size_t n_rejected = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const FilterResult r =
          FilterByScores(cases[i].predictions, scores[i], *lambda);
      std::vector<bool> flags(cases[i].predictions.size(), false);
      EvalCase k{{}, cases[i].gt};
      EvalCase x{{}, cases[i].gt};
      for (const ScoredCandidate& c : r.kept) {
        k.predictions.trajectories.push_back(c.trajectory);
        flags[c.head] = true;
      }
      for (const ScoredCandidate& c : r.rejected) {
        x.predictions.trajectories.push_back(c.trajectory);
      }
      n_rejected += r.rejected.size();
      if (r.fallback_used) ++f.fallback_cases;
      kept.push_back(std::move(k));
      if (!x.predictions.trajectories.empty()) rejected.push_back(std::move(x));
      kept_flags.push_back(std::move(flags));
    }
    f.kept = Evaluate(kept, config.eval.chi2_bins, &s.all.chi2_specs);
    if (!rejected.empty()) {
      f.rejected = Evaluate(rejected, config.eval.chi2_bins, &s.all.chi2_specs);
    }
    f.rejection_rate =
        static_cast<double>(n_rejected) / static_cast<double>(scored.size());
    s.filter = std::move(f);
  }

  const std::string prefix = config.eval.prefix;
  Json report = {{"n_cases", cases.size()},
                 {"num_heads", model.num_heads()},
                 {"checkpoint", config.predictor.checkpoint},
                 {"metrics", ToJson(s.all)},
                 {"plausibility_bins", BinsJson(s.bins)},
                 {"bin_trend", NumberOrNull(s.bin_trend)},
                 {"mean_score", s.mean_score}};
  if (s.filter) {
    report["filter"] = {
        {"lambda", s.filter->lambda},
        {"rejection_rate", s.filter->rejection_rate},
        {"fallback_cases", s.filter->fallback_cases},
        {"kept", ToJson(s.filter->kept)},
        {"rejected", s.filter->rejected ? ToJson(*s.filter->rejected) : Json()}};
  }
  WriteJson(dir / (prefix + "_report.json"), report);
  WriteFile(dir / (prefix + "_per_timestep.csv"),
            [&](std::ostream& out) { WritePerTimestepCsv(out, s.all); });
  WriteFile(dir / (prefix + "_bins.csv"),
            [&](std::ostream& out) { WriteBinsCsv(out, s.bins); });
  WriteFile(dir / (prefix + "_samples.csv"), [&](std::ostream& out) {
    out << "case,head,score,ade,fde" << (s.filter ? ",kept" : "") << '\n'
        << std::setprecision(17);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      for (std::size_t k = 0; k < cases[i].predictions.size(); ++k, ++flat) {
        out << i << ',' << k << ',' << scored[flat].score << ','
            << scored[flat].ade << ','
            << Fde(cases[i].predictions.trajectories[k], cases[i].gt);
        if (s.filter) out << ',' << (kept_flags[i][k] ? 1 : 0);
        out << '\n';
      }
    }
    out << "summary,all," << s.mean_score << ',' << s.all.ade << ','
        << s.all.fde;
    if (s.filter) {
      std::size_t n_kept = 0;
      for (const auto& flags : kept_flags) {
        n_kept += std::count(flags.begin(), flags.end(), true);
      }
      out << ',' << n_kept;
    }
    out << '\n';
  });
  if (s.filter) {
    WriteFile(dir / (prefix + "_kept_per_timestep.csv"),
              [&](std::ostream& out) { WritePerTimestepCsv(out, s.filter->kept); });
    if (s.filter->rejected) {
      WriteFile(dir / (prefix + "_rejected_per_timestep.csv"),
                [&](std::ostream& out) {
                  WritePerTimestepCsv(out, *s.filter->rejected);
                });
    }
  }

  log << "cases " << cases.size() << ", heads " << model.num_heads() << "\n"
      << "ade " << s.all.ade << " fde " << s.all.fde << " min_ade "
      << s.all.min_ade << " min_fde " << s.all.min_fde << "\n"
      << "chi2 velocity " << s.all.chi2.velocity << " acceleration "
      << s.all.chi2.acceleration << " angular_velocity "
      << s.all.chi2.angular_velocity << " angular_acceleration "
      << s.all.chi2.angular_acceleration << "\n"
      << "mean score " << s.mean_score << ", bin trend " << s.bin_trend
      << "\n";
  if (s.filter) {
    log << "filter lambda " << s.filter->lambda << ": rejection rate "
        << s.filter->rejection_rate << ", fallback cases "
        << s.filter->fallback_cases << "\n"
        << "kept ade " << s.filter->kept.ade << " fde " << s.filter->kept.fde
        << "\n";
    if (s.filter->rejected) {
      log << "rejected ade " << s.filter->rejected->ade << " fde "
          << s.filter->rejected->fde << "\n";
    } else {
      log << "nothing rejected\n";
    }
  }
  return s;
}

std::vector<FilterCase> ReadFilterCases(const std::string& candidates_path,
                                        const std::string& observations_path,
                                        double dt) {
  struct Partial {
    std::size_t first_line = 0;
    std::map<int, std::map<int, Vec2>> heads;
  };
  std::vector<std::string> order;
  std::map<std::string, Partial> partial;

  std::ifstream cand(candidates_path);
  if (!cand) throw IoError("cannot open '" + candidates_path + "'");
  std::string line;
  for (std::size_t n = 1; std::getline(cand, line); ++n) {
    const std::vector<std::string> t = Tokens(line);
    if (SkipLine(t)) continue;
    if (t.size() != 5) {
      throw ParseError("candidate rows need 'case_id head step x y'", n);
    }
    auto [it, fresh] = partial.try_emplace(t[0]);
    if (fresh) {
      it->second.first_line = n;
      order.push_back(t[0]);
    }
    const int head = ToIndex(t[1], n);
    const int step = ToIndex(t[2], n);
    auto& steps = it->second.heads[head];
    if (!steps.emplace(step, Vec2(ToNumber(t[3], n), ToNumber(t[4], n)))
             .second) {
      throw ParseError("duplicate head/step row", n);
    }
  }

  std::map<std::string, ObservableState> observed;
  std::ifstream obs(observations_path);
  if (!obs) throw IoError("cannot open '" + observations_path + "'");
  for (std::size_t n = 1; std::getline(obs, line); ++n) {
    const std::vector<std::string> t = Tokens(line);
    if (SkipLine(t)) continue;
    if (t.size() != 5 && t.size() != 5 + 3 * kNumJoints) {
      throw ParseError("observation rows need 'case_id root_x root_y vx vy'"
                       " and optionally " +
                           std::to_string(3 * kNumJoints) + " joint values",
                       n);
    }
    ObservableState o;
    o.root = Vec2(ToNumber(t[1], n), ToNumber(t[2], n));
    o.root_velocity = Vec2(ToNumber(t[3], n), ToNumber(t[4], n));
    if (t.size() > 5) {
      for (int j = 0; j < kNumJoints; ++j) {
        o.joints.emplace_back(ToNumber(t[5 + 3 * j], n),
                              ToNumber(t[6 + 3 * j], n),
                              ToNumber(t[7 + 3 * j], n));
      }
    }
    if (!observed.emplace(t[0], std::move(o)).second) {
      throw ParseError("duplicate observation for case '" + t[0] + "'", n);
    }
  }

  std::vector<FilterCase> cases;
  for (const std::string& id : order) {
    const Partial& p = partial.at(id);
    auto o = observed.find(id);
    if (o == observed.end()) {
      throw ParseError("case '" + id + "' has no observation", p.first_line);
    }
    FilterCase c;
    c.case_id = id;
    c.observable = o->second;
    int expect_head = 0;
    std::size_t length = 0;
    for (const auto& [head, steps] : p.heads) {
      if (head != expect_head++) {
        throw ParseError("case '" + id + "' skips head " +
                             std::to_string(expect_head - 1),
                         p.first_line);
      }
      Trajectory traj{{}, dt};
      int expect_step = 0;
      for (const auto& [step, point] : steps) {
        if (step != expect_step++) {
          throw ParseError("case '" + id + "' head " + std::to_string(head) +
                               " skips a step",
                           p.first_line);
        }
        traj.points.push_back(point);
      }
      if (length == 0) length = traj.size();
      if (traj.size() != length) {
        throw ParseError("case '" + id + "' heads differ in length",
                         p.first_line);
      }
      c.candidates.trajectories.push_back(std::move(traj));
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

Json RunFilter(const RunConfig& config, const std::string& candidates_path,
               const std::string& observations_path,
               std::optional<double> lambda, std::ostream& log) {
  const fs::path dir = EchoConfig(config);
  const double l = lambda.value_or(config.eval.lambda);
  const LocoValModel locoval = LoadLocoVal(dir);
  const std::vector<FilterCase> cases = ReadFilterCases(
      candidates_path, observations_path, config.data.synthetic.dt);

  Json out_cases = Json::array();
  std::size_t n_candidates = 0;
  std::size_t n_rejected = 0;
  std::size_t fallback_cases = 0;
  for (const FilterCase& c : cases) {
    if (static_cast<int>(c.candidates.trajectories.front().size()) !=
        locoval.layout.horizon) {
      throw ParseError("case '" + c.case_id + "' has " +
                           std::to_string(c.candidates.trajectories.front().size()) +
                           " steps, the surrogate expects " +
                           std::to_string(locoval.layout.horizon),
                       0);
    }
    if (locoval.layout.include_pose && !c.observable.has_pose()) {
      throw ParseError("case '" + c.case_id +
                           "' has no joints but the surrogate needs a pose",
                       0);
    }
    const FilterResult r = LocoValFilter(locoval, c.candidates, c.observable, l);
    Json j = ToJson(r);
    j["case_id"] = c.case_id;
    out_cases.push_back(std::move(j));
    n_candidates += c.candidates.size();
    n_rejected += r.rejected.size();
    if (r.fallback_used) ++fallback_cases;
  }
  Json report = {{"lambda", l},
                 {"n_cases", cases.size()},
                 {"n_candidates", n_candidates},
                 {"n_rejected", n_rejected},
                 {"fallback_cases", fallback_cases},
                 {"cases", out_cases}};
  WriteJson(dir / kFilterReportFile, report);
  log << "filtered " << n_candidates << " candidates in " << cases.size()
      << " cases at lambda " << l << ": rejected " << n_rejected
      << ", fallback cases " << fallback_cases << "\n";
  return report;
}

SweepKind ParseSweepKind(const std::string& name) {
  if (name == "lambda") return SweepKind::kLambda;
  if (name == "alpha") return SweepKind::kAlpha;
  throw ConfigError("unknown sweep grid '" + name + "'");
}

Json RunSweep(const RunConfig& config, SweepKind kind, std::ostream& log) {
  const fs::path dir = EchoConfig(config);
  const SplitInstances split = LoadSplit(config);
  const LocoValModel locoval = LoadLocoVal(dir);
  Json rows = Json::array();

  if (kind == SweepKind::kLambda) {
    const PredictorModel model = LoadPredictor(config, dir);
    const std::vector<SweepRow> sweep =
        SweepLambda(locoval, split.eval, model, config.eval.lambda_grid,
                    config.eval.chi2_bins);
    WriteFile(dir / "sweep_lambda.csv", [&](std::ostream& out) {
      out << "lambda,rejection_rate,fallback_cases,kept_ade,kept_fde,"
             "rejected_ade,rejected_fde\n"
          << std::setprecision(17);
      for (const SweepRow& r : sweep) {
        out << r.lambda << ',' << r.rejection_rate << ',' << r.fallback_cases
            << ',' << r.kept.ade << ',' << r.kept.fde << ',';
        if (r.rejected) {
          out << r.rejected->ade << ',' << r.rejected->fde;
        } else {
          out << ',';
        }
        out << '\n';
      }
    });
    for (const SweepRow& r : sweep) {
      rows.push_back(ToJson(r));
      log << "lambda " << r.lambda << ": rejection " << r.rejection_rate
          << ", kept ade " << r.kept.ade;
      if (r.rejected) log << ", rejected ade " << r.rejected->ade;
      log << "\n";
    }
    WriteJson(dir / "sweep_lambda.json", rows);
    return rows;
  }

  for (double alpha : config.eval.alpha_grid) {
    const PredictorTrainResult trained =
        TrainPredictor(split.train, &locoval, OptionsFor(config, alpha));
    std::vector<EvalCase> cases;
    double score_sum = 0.0;
    std::size_t n_scores = 0;
    for (const TrainingInstance& inst : split.eval) {
      EvalCase c{Predict(trained.model, inst.past, inst.observable),
                 inst.future};
      for (double s :
           ScoreBatch(locoval, c.predictions.trajectories, inst.observable)) {
        score_sum += s;
        ++n_scores;
      }
      cases.push_back(std::move(c));
    }
    const MetricsReport m = Evaluate(cases, config.eval.chi2_bins);
    const PredictorEpochLog& last = trained.log.back();
    rows.push_back({{"alpha", alpha},
                    {"metrics", ToJson(m)},
                    {"trajectory_loss", last.trajectory_loss},
                    {"emloco_loss", NumberOrNull(last.emloco_loss)},
                    {"mean_score", score_sum / static_cast<double>(n_scores)}});
    log << "alpha " << alpha << ": ade " << m.ade << " min_ade " << m.min_ade
        << " chi2 velocity " << m.chi2.velocity << "\n";
  }
  WriteFile(dir / "sweep_alpha.csv", [&](std::ostream& out) {
    out << "alpha,ade,fde,min_ade,min_fde,chi2_velocity,chi2_acceleration,"
           "chi2_angular_velocity,chi2_angular_acceleration,trajectory_loss,"
           "emloco_loss,mean_score\n"
        << std::setprecision(17);
    for (const Json& r : rows) {
      const Json& m = r["metrics"];
      out << r["alpha"].get<double>() << ',' << m["ade"].get<double>() << ','
          << m["fde"].get<double>() << ',' << m["min_ade"].get<double>()
          << ',' << m["min_fde"].get<double>();
      for (const char* p : kPrimitiveNames) {
        out << ',' << m["chi2"][p].get<double>();
      }
      out << ',' << r["trajectory_loss"].get<double>() << ',';
      if (!r["emloco_loss"].is_null()) out << r["emloco_loss"].get<double>();
      out << ',' << r["mean_score"].get<double>() << '\n';
    }
  });
  WriteJson(dir / "sweep_alpha.json", rows);
  return rows;
}

}  // namespace emloco
