// Copyright 2026 The mftg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// JSON experiment configuration. Every object is read strictly: unknown keys
// and wrongly typed values are errors.

#include <nlohmann/json.hpp>

#include "mftg/eval.hpp"

namespace mftg {

using nlohmann::json;

// A policy for one side: "uniform", "analytical" (cRPS only), "navigation"
// (the greedy navigation policy) or an actor checkpoint.
struct PolicySource {
  std::string name;
  std::string kind = "uniform";
  std::filesystem::path path;  // checkpoint kind only
};

struct EstimationConfig {
  Estimator estimator = Estimator::DPC;
  std::vector<int> rounds{1};
  std::vector<double> sigma{0.0};
  Connectivity connectivity = Connectivity::Abort;
  bool infinite = false;
  int horizon = 100;
  std::size_t n = 1000;
  std::size_t seeds = 10;
  std::size_t episodes = 20;  // paired regret rollouts (two-team environments)
  double greed = 0.05;
  double explore = 0.2;
  std::size_t view_radius = 0;  // battlefield sensing range in cells
};

struct EvaluationConfig {
  std::size_t episodes = 150;
  std::vector<std::size_t> deploy_n;
  PolicySource blue{"blue", "checkpoint", "blue_actor.ckpt"};
  PolicySource red{"red", "checkpoint", "red_actor.ckpt"};
};

struct SweepConfig {
  std::string parameter = "rounds";  // rounds, sigma, grad_penalty or n
  std::vector<double> values;
};

struct ExperimentConfig {
  EnvConfig env;
  TrainConfig train;
  EstimationConfig estimation;
  EvaluationConfig evaluation;
  std::vector<PolicySource> crossplay_blue;
  std::vector<PolicySource> crossplay_red;
  SweepConfig sweep;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";
};

namespace detail {

// Reads keys out of one JSON object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error("config: '" + where_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw Error("config: '" + path(key) + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw Error("config: unknown key '" + path(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline PolicySource parse_policy_source(const json& j, const std::string& where) {
  PolicySource p;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "uniform" || s == "analytical" || s == "navigation") {
      p.kind = p.name = s;
    } else {
      p.kind = "checkpoint";
      p.path = s;
      p.name = std::filesystem::path(s).stem().string();
    }
    return p;
  }
  ObjectReader r(j, where);
  std::string path;
  r.get("name", p.name);
  r.get("kind", p.kind);
  r.get("path", path);
  r.finish();
  p.path = path;
  if (p.kind != "uniform" && p.kind != "analytical" && p.kind != "navigation" &&
      p.kind != "checkpoint") {
    throw Error("config: '" + where + ".kind' must be uniform, analytical, navigation or checkpoint");
  }
  if (p.kind == "checkpoint" && p.path.empty()) throw Error("config: '" + where + ".path' is required");
  if (p.name.empty()) p.name = p.kind == "checkpoint" ? p.path.stem().string() : p.kind;
  return p;
}

inline json policy_source_json(const PolicySource& p) {
  json j{{"name", p.name}, {"kind", p.kind}};
  if (p.kind == "checkpoint") j["path"] = p.path.string();
  return j;
}

inline std::vector<PolicySource> parse_policy_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw Error("config: '" + where + "' must be an array");
  std::vector<PolicySource> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(parse_policy_source(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline void parse_env(const json& j, EnvConfig& env) {
  ObjectReader r(j, "env");
  std::string maps_dir = env.maps_dir.string();
  r.get("name", env.name);
  r.get("horizon", env.horizon);
  r.get("map", env.map);
  r.get("maps_dir", maps_dir);
  env.maps_dir = maps_dir;
  if (const json* b = r.sub("battlefield")) {
    ObjectReader br(*b, "env.battlefield");
    br.get("alpha_x", env.battlefield.alpha_x);
    br.get("alpha_y", env.battlefield.alpha_y);
    br.get("beta_x", env.battlefield.beta_x);
    br.get("beta_y", env.battlefield.beta_y);
    br.get("kappa", env.battlefield.kappa);
    br.get("blue_min_distance", env.battlefield_init.blue_min_distance);
    br.get("red_max_distance", env.battlefield_init.red_max_distance);
    br.get("split_probability", env.battlefield_init.split_probability);
    br.finish();
  }
  if (const json* n = r.sub("navigation")) {
    ObjectReader nr(*n, "env.navigation");
    nr.get("b", env.navigation.b);
    nr.get("c", env.navigation.c);
    nr.finish();
  }
  r.finish();
}

inline void parse_train(const json& j, TrainConfig& t) {
  ObjectReader r(j, "train");
  std::string activation = nn::activation_name(t.activation);
  std::string mode = critic_mode_name(t.mode);
  r.get("actor_lr", t.actor_lr);
  r.get("critic_lr", t.critic_lr);
  r.get("lr_decay", t.lr_decay);
  r.get("clip", t.clip);
  r.get("epochs", t.epochs);
  r.get("minibatches", t.minibatches);
  r.get("gamma", t.gamma);
  r.get("gae_lambda", t.gae_lambda);
  r.get("entropy_init", t.entropy_init);
  r.get("entropy_decay", t.entropy_decay);
  r.get("grad_penalty", t.grad_penalty);
  r.get("penalty_fd_step", t.penalty_fd_step);
  r.get("normalize_advantages", t.normalize_advantages);
  r.get("bootstrap_at_horizon", t.bootstrap_at_horizon);
  r.get("rollout_length", t.rollout_length);
  r.get("total_steps", t.total_steps);
  r.get("n_blue", t.n_blue);
  r.get("n_red", t.n_red);
  r.get("actor_hidden", t.actor_hidden);
  r.get("critic_hidden", t.critic_hidden);
  r.get("activation", activation);
  r.get("actor_output_gain", t.actor_output_gain);
  r.get("critic_mode", mode);
  r.finish();
  t.activation = nn::parse_activation(activation);
  t.mode = parse_critic_mode(mode);
}

inline void parse_estimation(const json& j, EstimationConfig& e) {
  ObjectReader r(j, "estimation");
  std::string estimator = estimator_name(e.estimator);
  std::string connectivity = e.connectivity == Connectivity::Abort ? "abort" : "bridge";
  r.get("estimator", estimator);
  r.get("rounds", e.rounds);
  r.get("sigma", e.sigma);
  r.get("connectivity", connectivity);
  r.get("infinite", e.infinite);
  r.get("horizon", e.horizon);
  r.get("n", e.n);
  r.get("seeds", e.seeds);
  r.get("episodes", e.episodes);
  r.get("greed", e.greed);
  r.get("explore", e.explore);
  r.get("view_radius", e.view_radius);
  r.finish();
  e.estimator = parse_estimator(estimator);
  if (connectivity == "abort") {
    e.connectivity = Connectivity::Abort;
  } else if (connectivity == "bridge") {
    e.connectivity = Connectivity::Bridge;
  } else {
    throw Error("config: 'estimation.connectivity' must be abort or bridge");
  }
}

inline void parse_evaluation(const json& j, EvaluationConfig& e) {
  ObjectReader r(j, "evaluation");
  r.get("episodes", e.episodes);
  r.get("deploy_n", e.deploy_n);
  if (const json* b = r.sub("blue")) e.blue = parse_policy_source(*b, "evaluation.blue");
  if (const json* b = r.sub("red")) e.red = parse_policy_source(*b, "evaluation.red");
  r.finish();
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  c.train.validate();
  if (c.env.horizon < 1) throw Error("config: 'env.horizon' must be >= 1");
  for (int r : c.estimation.rounds) {
    if (r < 0) throw Error("config: 'estimation.rounds' entries must be >= 0");
  }
  for (double s : c.estimation.sigma) {
    if (!(s >= 0.0)) throw Error("config: 'estimation.sigma' entries must be >= 0");
  }
  if (c.estimation.rounds.empty() || c.estimation.sigma.empty()) {
    throw Error("config: 'estimation.rounds' and 'estimation.sigma' must be non-empty");
  }
  if (c.estimation.horizon < 1 || c.estimation.n < 1 || c.estimation.seeds < 1 ||
      c.estimation.episodes < 1) {
    throw Error("config: estimation horizon, n, seeds and episodes must be >= 1");
  }
  if (c.evaluation.episodes < 1) throw Error("config: 'evaluation.episodes' must be >= 1");
  static const std::set<std::string> sweepable{"rounds", "sigma", "grad_penalty", "n"};
  if (!sweepable.contains(c.sweep.parameter)) {
    throw Error("config: 'sweep.parameter' must be rounds, sigma, grad_penalty or n");
  }
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  detail::ObjectReader r(j, "");
  std::string out_dir = c.out_dir.string();
  r.get("seed", c.seed);
  r.get("out_dir", out_dir);
  c.out_dir = out_dir;
  if (const json* e = r.sub("env")) detail::parse_env(*e, c.env);
  if (const json* t = r.sub("train")) detail::parse_train(*t, c.train);
  if (const json* e = r.sub("estimation")) detail::parse_estimation(*e, c.estimation);
  if (const json* e = r.sub("evaluation")) detail::parse_evaluation(*e, c.evaluation);
  if (const json* x = r.sub("crossplay")) {
    detail::ObjectReader xr(*x, "crossplay");
    if (const json* b = xr.sub("blue")) c.crossplay_blue = detail::parse_policy_list(*b, "crossplay.blue");
    if (const json* b = xr.sub("red")) c.crossplay_red = detail::parse_policy_list(*b, "crossplay.red");
    xr.finish();
  }
  if (const json* s = r.sub("sweep")) {
    detail::ObjectReader sr(*s, "sweep");
    sr.get("parameter", c.sweep.parameter);
    sr.get("values", c.sweep.values);
    sr.finish();
  }
  r.finish();
  c.train.seed = c.seed;
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(nn::read_file(path), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

// Fully resolved configuration; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  const auto& e = c.estimation;
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.string();
  j["env"] = {{"name", c.env.name},
              {"horizon", c.env.horizon},
              {"map", c.env.map},
              {"maps_dir", c.env.maps_dir.string()},
              {"battlefield",
               {{"alpha_x", c.env.battlefield.alpha_x},
                {"alpha_y", c.env.battlefield.alpha_y},
                {"beta_x", c.env.battlefield.beta_x},
                {"beta_y", c.env.battlefield.beta_y},
                {"kappa", c.env.battlefield.kappa},
                {"blue_min_distance", c.env.battlefield_init.blue_min_distance},
                {"red_max_distance", c.env.battlefield_init.red_max_distance},
                {"split_probability", c.env.battlefield_init.split_probability}}},
              {"navigation", {{"b", c.env.navigation.b}, {"c", c.env.navigation.c}}}};
  j["train"] = {{"actor_lr", t.actor_lr},
                {"critic_lr", t.critic_lr},
                {"lr_decay", t.lr_decay},
                {"clip", t.clip},
                {"epochs", t.epochs},
                {"minibatches", t.minibatches},
                {"gamma", t.gamma},
                {"gae_lambda", t.gae_lambda},
                {"entropy_init", t.entropy_init},
                {"entropy_decay", t.entropy_decay},
                {"grad_penalty", t.grad_penalty},
                {"penalty_fd_step", t.penalty_fd_step},
                {"normalize_advantages", t.normalize_advantages},
                {"bootstrap_at_horizon", t.bootstrap_at_horizon},
                {"rollout_length", t.rollout_length},
                {"total_steps", t.total_steps},
                {"n_blue", t.n_blue},
                {"n_red", t.n_red},
                {"actor_hidden", t.actor_hidden},
                {"critic_hidden", t.critic_hidden},
                {"activation", nn::activation_name(t.activation)},
                {"actor_output_gain", t.actor_output_gain},
                {"critic_mode", critic_mode_name(t.mode)}};
  j["estimation"] = {{"estimator", estimator_name(e.estimator)},
                     {"rounds", e.rounds},
                     {"sigma", e.sigma},
                     {"connectivity", e.connectivity == Connectivity::Abort ? "abort" : "bridge"},
                     {"infinite", e.infinite},
                     {"horizon", e.horizon},
                     {"n", e.n},
                     {"seeds", e.seeds},
                     {"episodes", e.episodes},
                     {"greed", e.greed},
                     {"explore", e.explore},
                     {"view_radius", e.view_radius}};
  j["evaluation"] = {{"episodes", c.evaluation.episodes},
                     {"deploy_n", c.evaluation.deploy_n},
                     {"blue", detail::policy_source_json(c.evaluation.blue)},
                     {"red", detail::policy_source_json(c.evaluation.red)}};
  json blue = json::array(), red = json::array();
  for (const auto& p : c.crossplay_blue) blue.push_back(detail::policy_source_json(p));
  for (const auto& p : c.crossplay_red) red.push_back(detail::policy_source_json(p));
  j["crossplay"] = {{"blue", blue}, {"red", red}};
  j["sweep"] = {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}};
  return j;
}

// Resolves a policy source. Relative checkpoint paths are looked up under
// `base` first.
inline Policy load_policy(const PolicySource& src, const Environment& env, Team team,
                          const std::filesystem::path& base) {
  if (src.kind == "uniform") return uniform_policy(env.action_count(team));
  if (src.kind == "analytical") {
    if (env.spec().name != "crps") throw Error("analytical policy exists only for crps");
    const auto pair = crps_analytical_policy_pair();
    return team == Team::Blue ? pair.blue : pair.red;
  }
  if (src.kind == "navigation") {
    const auto* nav = dynamic_cast<const NavigationEnv*>(&env);
    if (nav == nullptr) throw Error("navigation policy needs the navigation environment");
    return navigation_greedy_policy(nav->map(), 0.05, 0.2);
  }
  std::filesystem::path p = src.path;
  if (p.is_relative() && std::filesystem::exists(base / p)) p = base / p;
  if (!std::filesystem::exists(p)) throw Error("checkpoint not found: " + p.string());
  auto net = std::make_shared<nn::DenseNet>(nn::load_network(p));
  const std::size_t own = env.space_size(team);
  if (net->input_dim() != own + env.spec().blue_space_size + env.spec().red_space_size) {
    throw Error("checkpoint " + p.string() + " does not match the environment");
  }
  return actor_policy(std::move(net), own);
}

}  // namespace mftg
