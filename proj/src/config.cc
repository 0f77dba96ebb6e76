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

#include "emloco/config.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "emloco/error.h"

namespace emloco {
namespace {

using Json = nlohmann::json;

Json TrainJson(double lr, double wd, int steps, int batch) {
  TrainConfig c;
  c.learning_rate = lr;
  c.weight_decay = wd;
  c.total_steps = steps;
  c.batch_size = batch;
  Json j = ToJson(c);
  j.erase("seed");  // derived from the top-level seed
  return j;
}

TrainConfig TrainFromJson(const Json& j, std::uint64_t seed) {
  TrainConfig c = TrainConfigFromJson(j);
  c.seed = seed;
  return c;
}

std::string JoinKey(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

bool SameKind(const Json& base, const Json& value) {
  if (base.is_number_integer() || base.is_number_unsigned()) {
    if (value.is_number_integer() || value.is_number_unsigned()) return true;
    return value.is_number_float() &&
           std::floor(value.get<double>()) == value.get<double>();
  }
  if (base.is_number()) return value.is_number();
  return base.type() == value.type();
}

void MergeInto(Json& base, const Json& overrides, const std::string& prefix) {
  if (!overrides.is_object()) {
    throw ConfigError("'" + (prefix.empty() ? "config" : prefix) +
                      "' must be an object");
  }
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    const std::string key = JoinKey(prefix, it.key());
    if (!base.contains(it.key())) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      MergeInto(slot, it.value(), key);
      continue;
    }
    if (!SameKind(slot, it.value())) {
      throw ConfigError("config key '" + key + "' expects " +
                        std::string(slot.type_name()) + ", got " +
                        it.value().type_name());
    }
    if (slot.is_array() && !slot.empty()) {
      for (const Json& element : it.value()) {
        if (!SameKind(slot.front(), element)) {
          throw ConfigError("config key '" + key + "' has a bad element");
        }
      }
    }
    if (slot.is_number_integer() || slot.is_number_unsigned()) {
      if (it.value().is_number_float()) {
        slot = static_cast<std::int64_t>(it.value().get<double>());
      } else if (slot.is_number_unsigned() && it.value().get<double>() < 0) {
        throw ConfigError("config key '" + key + "' must be non-negative");
      } else {
        slot = it.value();
      }
    } else {
      slot = it.value();
    }
  }
}

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void CheckPositive(int value, const char* name) {
  if (value < 1) throw ConfigError(std::string(name) + " must be positive");
}

void CheckUnit(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return SplitMix(seed ^ SplitMix(h));
}

std::uint64_t RunConfig::SubSeed(std::string_view stream) const {
  return DeriveSeed(seed, stream);
}

std::string RunConfig::ResolvedOutputDir() const {
  std::filesystem::path dir(output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("EMLOCO_OUTPUT_ROOT");
        root != nullptr && *root != '\0') {
      dir = std::filesystem::path(root) / dir;
    }
  }
  return dir.string();
}

void RunConfig::Validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  oracle.Validate();
  data.synthetic.Validate(oracle);
  CheckPositive(data.n_tracks, "data.n_tracks");
  CheckPositive(data.n_poses, "data.n_poses");
  if (data.past_length < 2) throw ConfigError("data.past_length must be >= 2");
  CheckPositive(data.horizon, "data.horizon");
  CheckPositive(data.window_stride, "data.window_stride");
  CheckPositive(data.bank_stride, "data.bank_stride");
  if (!(data.eval_fraction > 0.0 && data.eval_fraction < 1.0)) {
    throw ConfigError("data.eval_fraction must lie in (0, 1)");
  }
  if (data.n_plausible < 0 || data.n_implausible < 0 ||
      data.n_plausible + data.n_implausible < 2) {
    throw ConfigError("data needs at least two plausibility pairs");
  }
  for (int h : locoval.hidden) CheckPositive(h, "locoval.hidden");
  if (!(locoval.holdout_fraction >= 0.0 && locoval.holdout_fraction < 1.0)) {
    throw ConfigError("locoval.holdout_fraction must lie in [0, 1)");
  }
  locoval.train.Validate();
  CheckPositive(predictor.num_heads, "predictor.num_heads");
  if (!(predictor.alpha >= 0.0)) {
    throw ConfigError("predictor.alpha must be non-negative");
  }
  for (int h : predictor.trunk_hidden) CheckPositive(h, "predictor.trunk_hidden");
  if (predictor.trunk_hidden.empty()) {
    throw ConfigError("predictor.trunk_hidden needs a layer");
  }
  if (predictor.checkpoint.empty()) {
    throw ConfigError("predictor.checkpoint is empty");
  }
  predictor.train.Validate();
  CheckUnit(eval.lambda, "eval.lambda");
  CheckPositive(eval.chi2_bins, "eval.chi2_bins");
  CheckPositive(eval.plausibility_bins, "eval.plausibility_bins");
  if (eval.prefix.empty()) throw ConfigError("eval.prefix is empty");
  for (double l : eval.lambda_grid) CheckUnit(l, "eval.lambda_grid");
  for (double a : eval.alpha_grid) {
    if (!(a >= 0.0)) throw ConfigError("eval.alpha_grid must be non-negative");
  }
}

Json DefaultConfigJson() {
  const OracleParams o;
  const SyntheticConfig s;
  const DataConfig d;
  return {
      {"seed", std::uint64_t{0}},
      {"output_dir", "run"},
      {"oracle",
       {{"v_max", o.v_max},
        {"a_max", o.a_max},
        {"turn_rate_max", o.turn_rate_max},
        {"gamma", o.gamma},
        {"w_follow", o.w_follow},
        {"w_energy", o.w_energy},
        {"follow_scale", o.follow_scale}}},
      {"data",
       {{"trajectories", ""},
        {"dt", s.dt},
        {"n_tracks", d.n_tracks},
        {"track_length", s.track_length},
        {"speed_min", s.speed_min},
        {"speed_max", s.speed_max},
        {"accel_max", s.accel_max},
        {"curvature_min", s.curvature_min},
        {"curvature_max", s.curvature_max},
        {"noise_sigma", s.noise_sigma},
        {"min_reward", s.min_reward},
        {"mix",
         {{"straight", s.mix.straight},
          {"speed_change", s.mix.speed_change},
          {"turn", s.mix.turn},
          {"stop_and_go", s.mix.stop_and_go}}},
        {"n_poses", d.n_poses},
        {"past_length", d.past_length},
        {"horizon", d.horizon},
        {"window_stride", d.window_stride},
        {"bank_stride", d.bank_stride},
        {"eval_fraction", d.eval_fraction},
        {"n_plausible", d.n_plausible},
        {"n_implausible", d.n_implausible}}},
      {"locoval",
       {{"hidden", {128, 128, 128}},
        {"include_pose", true},
        {"holdout_fraction", 0.1},
        {"train", TrainJson(1e-3, 1e-4, 6000, 32)}}},
      {"predictor",
       {{"num_heads", 20},
        {"alpha", 100.0},
        {"trunk_hidden", {256, 256}},
        {"include_pose", true},
        {"form", "mse_to_one"},
        {"checkpoint", "predictor.json"},
        {"train", TrainJson(1e-3, 0.0, 5000, 16)}}},
      {"eval",
       {{"lambda", 0.7},
        {"chi2_bins", 50},
        {"plausibility_bins", 10},
        {"prefix", "eval"},
        {"lambda_grid", {0.0, 0.5, 0.6, 0.7, 0.8, 0.9}},
        {"alpha_grid", {0.0, 1.0, 10.0, 100.0}}}},
  };
}

Json MergeConfig(const Json& base, const Json& overrides) {
  Json out = base;
  MergeInto(out, overrides, "");
  return out;
}

void ApplyOverride(Json& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json patch = value;
  std::size_t end = key.size();
  while (true) {
    const std::size_t dot = key.rfind('.', end - 1);
    const std::size_t start = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(start, end - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    patch = Json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  MergeInto(config, patch, "");
}

RunConfig RunConfigFromJson(const Json& raw) {
  const Json j = MergeConfig(DefaultConfigJson(), raw);
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();

  const Json& o = j.at("oracle");
  c.oracle.v_max = o.at("v_max");
  c.oracle.a_max = o.at("a_max");
  c.oracle.turn_rate_max = o.at("turn_rate_max");
  c.oracle.gamma = o.at("gamma");
  c.oracle.w_follow = o.at("w_follow");
  c.oracle.w_energy = o.at("w_energy");
  c.oracle.follow_scale = o.at("follow_scale");

  const Json& d = j.at("data");
  c.data.trajectories = d.at("trajectories");
  SyntheticConfig& s = c.data.synthetic;
  s.dt = d.at("dt");
  s.track_length = d.at("track_length");
  s.speed_min = d.at("speed_min");
  s.speed_max = d.at("speed_max");
  s.accel_max = d.at("accel_max");
  s.curvature_min = d.at("curvature_min");
  s.curvature_max = d.at("curvature_max");
  s.noise_sigma = d.at("noise_sigma");
  s.min_reward = d.at("min_reward");
  s.mix.straight = d.at("mix").at("straight");
  s.mix.speed_change = d.at("mix").at("speed_change");
  s.mix.turn = d.at("mix").at("turn");
  s.mix.stop_and_go = d.at("mix").at("stop_and_go");
  c.data.n_tracks = d.at("n_tracks");
  c.data.n_poses = d.at("n_poses");
  c.data.past_length = d.at("past_length");
  c.data.horizon = d.at("horizon");
  c.data.window_stride = d.at("window_stride");
  c.data.bank_stride = d.at("bank_stride");
  c.data.eval_fraction = d.at("eval_fraction");
  c.data.n_plausible = d.at("n_plausible");
  c.data.n_implausible = d.at("n_implausible");

  const Json& l = j.at("locoval");
  c.locoval.hidden = l.at("hidden").get<std::vector<int>>();
  c.locoval.include_pose = l.at("include_pose");
  c.locoval.holdout_fraction = l.at("holdout_fraction");
  c.locoval.train = TrainFromJson(l.at("train"), c.SubSeed("locoval"));

  const Json& p = j.at("predictor");
  c.predictor.num_heads = p.at("num_heads");
  c.predictor.alpha = p.at("alpha");
  c.predictor.trunk_hidden = p.at("trunk_hidden").get<std::vector<int>>();
  c.predictor.include_pose = p.at("include_pose");
  c.predictor.form = ParseEmLocoForm(p.at("form"));
  c.predictor.checkpoint = p.at("checkpoint");
  c.predictor.train = TrainFromJson(p.at("train"), c.SubSeed("predictor"));

  const Json& e = j.at("eval");
  c.eval.lambda = e.at("lambda");
  c.eval.chi2_bins = e.at("chi2_bins");
  c.eval.plausibility_bins = e.at("plausibility_bins");
  c.eval.prefix = e.at("prefix");
  c.eval.lambda_grid = e.at("lambda_grid").get<std::vector<double>>();
  c.eval.alpha_grid = e.at("alpha_grid").get<std::vector<double>>();
  c.Validate();
  return c;
}

Json ToJson(const RunConfig& c) {
  auto train = [](const TrainConfig& t) {
    Json j = ToJson(t);
    j.erase("seed");
    return j;
  };
  const SyntheticConfig& s = c.data.synthetic;
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"oracle",
       {{"v_max", c.oracle.v_max},
        {"a_max", c.oracle.a_max},
        {"turn_rate_max", c.oracle.turn_rate_max},
        {"gamma", c.oracle.gamma},
        {"w_follow", c.oracle.w_follow},
        {"w_energy", c.oracle.w_energy},
        {"follow_scale", c.oracle.follow_scale}}},
      {"data",
       {{"trajectories", c.data.trajectories},
        {"dt", s.dt},
        {"n_tracks", c.data.n_tracks},
        {"track_length", s.track_length},
        {"speed_min", s.speed_min},
        {"speed_max", s.speed_max},
        {"accel_max", s.accel_max},
        {"curvature_min", s.curvature_min},
        {"curvature_max", s.curvature_max},
        {"noise_sigma", s.noise_sigma},
        {"min_reward", s.min_reward},
        {"mix",
         {{"straight", s.mix.straight},
          {"speed_change", s.mix.speed_change},
          {"turn", s.mix.turn},
          {"stop_and_go", s.mix.stop_and_go}}},
        {"n_poses", c.data.n_poses},
        {"past_length", c.data.past_length},
        {"horizon", c.data.horizon},
        {"window_stride", c.data.window_stride},
        {"bank_stride", c.data.bank_stride},
        {"eval_fraction", c.data.eval_fraction},
        {"n_plausible", c.data.n_plausible},
        {"n_implausible", c.data.n_implausible}}},
      {"locoval",
       {{"hidden", c.locoval.hidden},
        {"include_pose", c.locoval.include_pose},
        {"holdout_fraction", c.locoval.holdout_fraction},
        {"train", train(c.locoval.train)}}},
      {"predictor",
       {{"num_heads", c.predictor.num_heads},
        {"alpha", c.predictor.alpha},
        {"trunk_hidden", c.predictor.trunk_hidden},
        {"include_pose", c.predictor.include_pose},
        {"form", EmLocoFormName(c.predictor.form)},
        {"checkpoint", c.predictor.checkpoint},
        {"train", train(c.predictor.train)}}},
      {"eval",
       {{"lambda", c.eval.lambda},
        {"chi2_bins", c.eval.chi2_bins},
        {"plausibility_bins", c.eval.plausibility_bins},
        {"prefix", c.eval.prefix},
        {"lambda_grid", c.eval.lambda_grid},
        {"alpha_grid", c.eval.alpha_grid}}},
  };
}

RunConfig LoadRunConfig(const std::string& path,
                        const std::vector<std::string>& overrides) {
  Json config = DefaultConfigJson();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    Json file = Json::parse(in, nullptr, false);
    if (file.is_discarded()) {
      throw ConfigError("config '" + path + "' is not valid JSON");
    }
    MergeInto(config, file, "");
  }
  for (const std::string& o : overrides) ApplyOverride(config, o);
  return RunConfigFromJson(config);
}

}  // namespace emloco
