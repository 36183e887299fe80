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

// mftg: train, evaluate and analyse mean-field team games.
//
//   mftg train     --config run.json [--seed N] [--out DIR] [--quiet]
//   mftg eval      --config run.json
//   mftg crossplay --config run.json
//   mftg estimate  --config run.json
//   mftg sweep     --config run.json
//   mftg plot      REPORT [--out DIR]
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "mftg/config.hpp"
#include "mftg/plot.hpp"

namespace fs = std::filesystem;
using namespace mftg;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

struct Run {
  ExperimentConfig cfg;
  fs::path out;
  std::shared_ptr<Environment> env;
  bool quiet = false;

  void log(const std::string& msg) const {
    if (!quiet) std::cout << msg << std::endl;
  }
  void write(const std::string& name, const std::string& text) const {
    nn::write_file_atomic(out / name, text);
    log("wrote " + (out / name).string());
  }
  void write_json(const std::string& name, const json& j) const { write(name, j.dump(2) + "\n"); }
};

Run open_run(const Common& c) {
  Run r;
  r.cfg = load_config(c.config);
  if (c.seed) {
    r.cfg.seed = *c.seed;
    r.cfg.train.seed = *c.seed;
  }
  if (!c.out.empty()) r.cfg.out_dir = c.out;
  r.out = r.cfg.out_dir;
  r.quiet = c.quiet;
  fs::create_directories(r.out);
  r.env = make_environment(r.cfg.env);
  nn::write_file_atomic(r.out / "config.resolved.json", to_json(r.cfg).dump(2) + "\n");
  return r;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// train

void save_checkpoints(const Run& run, const TrainResult& r, const std::string& suffix) {
  const std::pair<const char*, const nn::DenseNet*> nets[] = {{"blue_actor", &r.blue.actor},
                                                              {"blue_critic", &r.blue.critic},
                                                              {"red_actor", &r.red.actor},
                                                              {"red_critic", &r.red.critic}};
  for (const auto& [name, net] : nets) {
    nn::save_network(*net, name, run.out / (std::string(name) + ".ckpt" + suffix));
  }
}

TrainResult train_to(const Run& run, const TrainConfig& tc, const fs::path& dir) {
  Run sub = run;

  sub.out = dir;
  fs::create_directories(dir);
  std::string metrics = std::string(kMetricsHeader) + "\n";
  auto on_metrics = [&](const MetricsRow& m) {
    metrics += metrics_csv_line(m) + "\n";
    if (!run.quiet && m.team == Team::Blue && m.update_idx % 50 == 0) {
      std::cout << "update " << m.update_idx << " steps " << m.env_steps << " blue reward "
                << fmt(m.mean_ep_reward) << std::endl;
    }
  };
  try {
    auto r = train(*run.env, tc, on_metrics);
    save_checkpoints(sub, r, "");
    sub.write("metrics.csv", metrics);
    json manifest = report_header("train");
    manifest["seed"] = tc.seed;
    manifest["env"] = run.cfg.env.name;
    manifest["env_steps"] = r.env_steps;
    manifest["updates"] = r.updates;
    manifest["reward_to_go_buffers"] = r.reward_to_go_check.buffers;
    manifest["reward_to_go_violations"] = r.reward_to_go_check.violations;
    manifest["files"] = {"blue_actor.ckpt", "blue_critic.ckpt", "red_actor.ckpt", "red_critic.ckpt",
                         "metrics.csv"};
    sub.write_json("manifest.json", manifest);
    return r;
  } catch (const TrainingAborted& e) {
    save_checkpoints(sub, e.partial(), ".aborted");
    nn::write_file_atomic(dir / "metrics.csv", metrics);
    throw;
  }
}

int cmd_train(const Common& c) {
  const auto run = open_run(c);
  train_to(run, run.cfg.train, run.out);
  return 0;
}

// ---------------------------------------------------------------------------
// eval

PolicyPair load_pair(const Run& run) {
  return {load_policy(run.cfg.evaluation.blue, *run.env, Team::Blue, run.out),
          load_policy(run.cfg.evaluation.red, *run.env, Team::Red, run.out)};
}

std::pair<std::size_t, std::size_t> team_sizes(const Run& run) {
  return {run.cfg.train.n_blue, run.env->single_team() ? 0 : run.cfg.train.n_red};
}

int cmd_eval(const Common& c) {
  const auto run = open_run(c);
  const auto pair = load_pair(run);
  const auto [nb, nr] = team_sizes(run);
  const auto& ev = run.cfg.evaluation;
  const auto e = evaluate_policy_pair(*run.env, pair, ev.episodes, nb, nr, run.cfg.seed);
  auto j = to_json(e);
  std::ostringstream csv;
  csv.precision(12);
  csv << "episode,blue_return\n";
  for (std::size_t k = 0; k < e.returns.size(); ++k) csv << k << ',' << e.returns[k] << '\n';
  run.write("eval.csv", csv.str());
  if (run.env->spec().name == "crps") {
    const auto traj = rollout_infinite(*run.env, crps_initial_blue(), crps_initial_red(), pair,
                                       run.env->spec().horizon);
    const auto gap = nash_gap_crps(traj);
    j["oracle_value"] = traj.cumulative_value;
    j["nash_value_gap"] = gap.value_gap;
    j["nash_field_gap"] = gap.field_gap;
    std::vector<EpisodeResult> eps;
    for (std::size_t k = 0; k < std::min<std::size_t>(ev.episodes, 150); ++k) {
      Rng rng(derive_seed(run.cfg.seed, "eval_episode", k));
      eps.push_back(run_episode(*run.env, pair, nb, nr, rng, true));
    }
    run.write("trajectory.csv", trajectory_csv(eps));
  }
  run.write_json("eval.json", j);
  if (!ev.deploy_n.empty()) {
    std::vector<std::pair<std::size_t, std::size_t>> deploy;
    for (std::size_t n : ev.deploy_n) deploy.emplace_back(n, nr == 0 ? 0 : n * nr / nb);
    const auto s = scaling_eval(*run.env, pair, nb, nr, deploy, ev.episodes, run.cfg.seed);
    run.write("scaling.csv", scaling_csv(s));
    run.write_json("scaling.json", to_json(s));
  }
  run.log("mean blue return " + fmt(e.stats.mean) + " +- " + fmt(e.stats.std_error));
  return 0;
}

// ---------------------------------------------------------------------------
// crossplay

int cmd_crossplay(const Common& c) {
  const auto run = open_run(c);
  const auto [nb, nr] = team_sizes(run);
  std::vector<NamedPolicy> blue, red;
  for (const auto& p : run.cfg.crossplay_blue) {
    blue.push_back({p.name, load_policy(p, *run.env, Team::Blue, run.out)});
  }
  for (const auto& p : run.cfg.crossplay_red) {
    red.push_back({p.name, load_policy(p, *run.env, Team::Red, run.out)});
  }
  const auto t = crossplay(*run.env, blue, red, run.cfg.evaluation.episodes, nb, nr, run.cfg.seed);
  run.write("crossplay.csv", crossplay_csv(t));
  run.write_json("crossplay.json", to_json(t));
  return 0;
}

// ---------------------------------------------------------------------------
// estimate / sweep

struct EstimationSummary {
  int rounds = 0;
  double sigma = 0.0;
  double mean_tv = 0.0;     // average over seeds and time
  double max_tv = 0.0;      // average over seeds and time
  double final_max_tv = 0.0;
  double delta_j = std::numeric_limits<double>::quiet_NaN();
  double full_return = std::numeric_limits<double>::quiet_NaN();
};

EstimationSummary run_estimation(const Run& run, int rounds, double sigma,
                                 std::vector<TraceRow>& trace) {
  const auto& e = run.cfg.estimation;
  EstimationSummary s{rounds, sigma};
  if (const auto* nav = dynamic_cast<const NavigationEnv*>(run.env.get())) {
    const auto policy = navigation_greedy_policy(nav->map(), e.greed, e.explore);
    const NavigationRunConfig nc{e.horizon, rounds, e.estimator, sigma};
    std::vector<std::vector<TraceRow>> per_seed(e.seeds);
    parallel_for(e.seeds, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(run.cfg.seed, "estimation_seed", k);
      if (e.infinite) {
        Rng rng(derive_seed(seed, "initial_field", 0));
        per_seed[k] = navigation_estimation_infinite(*nav, policy, nav->initial_mean_field(rng), nc, seed);
      } else {
        per_seed[k] = navigation_estimation_finite(*nav, policy, e.n, nc, seed);
      }
    });
    std::size_t count = 0;
    for (const auto& rows : per_seed) {
      for (const auto& r : rows) {
        s.mean_tv += r.mean_tv_error;
        s.max_tv += r.max_tv_error;
        ++count;
      }
      s.final_max_tv += rows.back().max_tv_error / static_cast<double>(e.seeds);
      trace.insert(trace.end(), rows.begin(), rows.end());
    }
    s.mean_tv /= static_cast<double>(count);
    s.max_tv /= static_cast<double>(count);
    return s;
  }
  const auto* bf = dynamic_cast<const BattlefieldEnv*>(run.env.get());
  if (bf == nullptr) throw Error("estimation needs a grid environment (navigation or battlefield)");
  RegretConfig rc;
  rc.estimator = e.estimator;
  rc.rounds = rounds;
  rc.sigma = sigma;
  rc.grid_n = bf->params().map.n;
  rc.n_blue = run.cfg.train.n_blue;
  rc.n_red = run.cfg.train.n_red;
  rc.episodes = e.episodes;
  rc.connectivity = e.connectivity;
  rc.view_radius = e.view_radius;
  const auto g = regret_delta_j(*run.env, load_pair(run), rc, run.cfg.seed);
  for (const auto& r : g.trace) {
    s.mean_tv += r.mean_tv_error / static_cast<double>(g.trace.size());
    s.max_tv += r.max_tv_error / static_cast<double>(g.trace.size());
  }
  s.final_max_tv = g.trace.back().max_tv_error;
  s.delta_j = g.delta_j;
  s.full_return = g.full_return;
  trace = g.trace;
  return s;
}

std::string summary_csv(const std::vector<EstimationSummary>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << "R_com,sigma,mean_tv_error,max_tv_error,final_max_tv_error,delta_j,full_return\n";
  for (const auto& r : rows) {
    os << r.rounds << ',' << r.sigma << ',' << r.mean_tv << ',' << r.max_tv << ',' << r.final_max_tv
       << ',' << r.delta_j << ',' << r.full_return << '\n';
  }
  return os.str();
}

json summary_json(const std::vector<EstimationSummary>& rows, const Run& run) {
  auto j = report_header("estimation");
  j["estimator"] = estimator_name(run.cfg.estimation.estimator);
  auto& out = j["rows"] = json::array();
  for (const auto& r : rows) {
    json row{{"R_com", r.rounds}, {"sigma", r.sigma}, {"mean_tv_error", r.mean_tv},
             {"max_tv_error", r.max_tv}, {"final_max_tv_error", r.final_max_tv}};
    if (std::isfinite(r.delta_j)) row["delta_j"] = r.delta_j, row["full_return"] = r.full_return;
    out.push_back(row);
  }
  return j;
}

std::string trace_name(int rounds, double sigma) {
  return "trace_R" + std::to_string(rounds) + (sigma > 0.0 ? "_sigma" + fmt(sigma) : "") + ".csv";
}

int cmd_estimate(const Common& c) {
  const auto run = open_run(c);
  std::vector<EstimationSummary> rows;
  for (int r : run.cfg.estimation.rounds) {
    for (double sigma : run.cfg.estimation.sigma) {
      std::vector<TraceRow> trace;
      rows.push_back(run_estimation(run, r, sigma, trace));
      run.write(trace_name(r, sigma), trace_csv(trace));
    }
  }
  run.write("estimation.csv", summary_csv(rows));
  run.write_json("estimation.json", summary_json(rows, run));
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto run = open_run(c);
  const auto& sw = run.cfg.sweep;
  if (sw.values.empty()) throw Error("config: 'sweep.values' is empty");
  if (sw.parameter == "rounds" || sw.parameter == "sigma") {
    std::vector<EstimationSummary> rows;
    for (double v : sw.values) {
      const int r = sw.parameter == "rounds" ? static_cast<int>(v) : run.cfg.estimation.rounds.front();
      const double sigma = sw.parameter == "sigma" ? v : run.cfg.estimation.sigma.front();
      if (r < 0 || sigma < 0.0) throw Error("sweep values must be >= 0");
      std::vector<TraceRow> trace;
      rows.push_back(run_estimation(run, r, sigma, trace));
      run.write(trace_name(r, sigma), trace_csv(trace));
    }
    run.write("summary.csv", summary_csv(rows));
    run.write_json("summary.json", summary_json(rows, run));
    return 0;
  }
  const auto [nb, nr] = team_sizes(run);
  if (sw.parameter == "n") {
    std::vector<std::pair<std::size_t, std::size_t>> deploy;
    for (double v : sw.values) {
      if (v < 1) throw Error("sweep values must be >= 1");
      const auto n = static_cast<std::size_t>(v);
      deploy.emplace_back(n, nr == 0 ? 0 : n * nr / nb);
    }
    const auto s = scaling_eval(*run.env, load_pair(run), nb, nr, deploy, run.cfg.evaluation.episodes,
                                run.cfg.seed);
    run.write("summary.csv", scaling_csv(s));
    run.write_json("summary.json", to_json(s));
    return 0;
  }
  // grad_penalty: one training run per value, then return and sensitivity.
  std::ostringstream os;
  os.precision(12);
  os << "grad_penalty,mean_return,std_error,sensitivity\n";
  for (double v : sw.values) {
    TrainConfig tc = run.cfg.train;
    tc.grad_penalty = v;
    const auto dir = run.out / ("gp_" + fmt(v));
    const auto r = train_to(run, tc, dir);
    const auto bs = run.env->spec().blue_space_size;
    const PolicyPair pair{actor_policy(std::make_shared<nn::DenseNet>(r.blue.actor), bs),
                          actor_policy(std::make_shared<nn::DenseNet>(r.red.actor),
                                       run.env->spec().red_space_size)};
    const auto e = evaluate_policy_pair(*run.env, pair, run.cfg.evaluation.episodes, nb, nr, run.cfg.seed);
    const double sens = policy_sensitivity(r.blue.actor, bs, bs, run.env->spec().red_space_size, 0.1,
                                           501, run.cfg.seed);
    os << v << ',' << e.stats.mean << ',' << e.stats.std_error << ',' << sens << '\n';
  }
  run.write("summary.csv", os.str());
  return 0;
}

// ---------------------------------------------------------------------------
// plot

double num(const std::string& s) { return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s); }

int cmd_plot(const std::string& report, const std::string& out_dir, bool quiet) {
  const fs::path path = report;
  if (!fs::exists(path)) throw Error("report not found: " + path.string());
  const fs::path out = out_dir.empty() ? path.parent_path() : fs::path(out_dir);
  if (!out.empty()) fs::create_directories(out);
  const std::string stem = path.stem().string();
  const std::string text = nn::read_file(path);
  auto emit = [&](const std::string& name, const std::string& svg) {
    nn::write_file_atomic(out / name, svg);
    if (!quiet) std::cout << "wrote " << (out / name).string() << std::endl;
  };

  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error&) {
      throw Error("unknown report schema: " + path.string());
    }
    if (!j.is_object() || j.value("schema", "") != kReportSchema) {
      throw Error("unknown report schema: " + path.string());
    }
    const auto kind = j.value("kind", "");
    plot::Chart chart;
    if (kind == "estimation") {
      chart = {"Estimation error vs communication rounds", "R_com", "TV error", true, {}};
      plot::Series mean{"mean TV", {}, {}}, mx{"max TV", {}, {}};
      for (const auto& r : j.at("rows")) {
        mean.x.push_back(r.at("R_com").get<double>());
        mean.y.push_back(r.at("mean_tv_error").get<double>());
        mx.x.push_back(r.at("R_com").get<double>());
        mx.y.push_back(r.at("max_tv_error").get<double>());
      }
      chart.series = {mean, mx};
    } else if (kind == "scaling") {
      chart = {"Deployment variance vs population", "N (Blue)", "return variance", true, {}};
      plot::Series s{"variance", {}, {}};
      for (const auto& r : j.at("rows")) {
        s.x.push_back(r.at("n_blue").get<double>());
        s.y.push_back(r.at("variance").get<double>());
      }
      chart.series = {s};
    } else if (kind == "mf_gap") {
      chart = {"Mean-field approximation gap", "N", "TV gap", true, {}};
      plot::Series g{"mean gap", {}, {}}, b{"bound", {}, {}};
      for (const auto& r : j.at("rows")) {
        g.x.push_back(r.at("n").get<double>());
        g.y.push_back(r.at("mean_gap").get<double>());
        b.x.push_back(r.at("n").get<double>());
        b.y.push_back(r.at("bound").get<double>());
      }
      chart.series = {g, b};
    } else {
      throw Error("unknown report schema kind '" + kind + "'");
    }
    emit(stem + ".svg", plot::render(chart));
    return 0;
  }

  const auto table = plot::parse_csv(text);
  const std::string header = text.substr(0, text.find('\n'));
  if (header == kMetricsHeader) {
    plot::Chart chart{"Training curve", "environment steps", "mean episode reward", false, {}};
    for (const char* team : {"blue", "red"}) {
      plot::Series s{team, {}, {}};
      for (const auto& row : table.rows) {
        if (row[table.column("team")] != team) continue;
        s.x.push_back(num(row[table.column("env_steps")]));
        s.y.push_back(num(row[table.column("mean_ep_reward")]));
      }
      if (!s.x.empty()) chart.series.push_back(s);
    }
    emit(stem + ".svg", plot::render(chart));
    return 0;
  }
  if (header == kTraceHeader) {
    // Error over time, averaged over seeds, one series per (R_com, estimator).
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    for (const auto& row : table.rows) {
      const std::string key = row[table.column("estimator")] + " R=" + row[table.column("R_com")];
      auto& cell = acc[key][std::stoi(row[table.column("t")])];
      cell.first += num(row[table.column("mean_tv_error")]);
      cell.second += 1;
    }
    plot::Chart chart{"Estimation error over time", "t", "mean TV error", true, {}};
    for (const auto& [key, by_t] : acc) {
      plot::Series s{key, {}, {}};
      for (const auto& [t, v] : by_t) s.x.push_back(t), s.y.push_back(v.first / v.second);
      chart.series.push_back(s);
    }
    emit(stem + ".svg", plot::render(chart));
    return 0;
  }
  if (header == "episode,t,team,p0,p1,p2") {
    std::map<std::pair<std::string, std::string>, plot::SimplexPath> paths;
    for (const auto& row : table.rows) {
      auto& p = paths[{row[0], row[2]}];
      p.group = row[2] == "blue" ? 0 : 1;
      p.points.push_back({num(row[3]), num(row[4]), num(row[5])});
    }
    std::vector<plot::SimplexPath> list;
    for (auto& [k, p] : paths) list.push_back(std::move(p));
    emit(stem + ".svg", plot::render_simplex("Team distributions (blue, red)", {"R", "P", "S"}, list));
    return 0;
  }
  throw Error("unknown report schema: " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mftg: mean-field team games"};
  app.require_subcommand(1);
  Common common;
  std::string report, plot_out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", common.seed, "override the master seed");
    sub->add_option("--out", common.out, "override the output directory");
    sub->add_flag("--quiet", common.quiet, "suppress progress output");
  };
  std::map<std::string, std::function<int(const Common&)>> commands{
      {"train", cmd_train}, {"eval", cmd_eval},     {"crossplay", cmd_crossplay},
      {"estimate", cmd_estimate}, {"sweep", cmd_sweep}};
  std::map<std::string, CLI::App*> subs;
  subs["train"] = app.add_subcommand("train", "train both teams with MF-MAPPO");
  subs["eval"] = app.add_subcommand("eval", "evaluate a policy pair");
  subs["crossplay"] = app.add_subcommand("crossplay", "head-to-head table of registered policies");
  subs["estimate"] = app.add_subcommand("estimate", "run opponent mean-field estimation");
  subs["sweep"] = app.add_subcommand("sweep", "sweep R_com, sigma, grad_penalty or N");
  for (auto& [name, sub] : subs) add_common(sub);
  auto* plot_cmd = app.add_subcommand("plot", "render a report as SVG");
  plot_cmd->add_option("report", report, "metrics, trace, trajectory CSV or report JSON")->required();
  plot_cmd->add_option("--out", plot_out, "output directory (default: beside the report)");
  plot_cmd->add_flag("--quiet", common.quiet, "suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (plot_cmd->parsed()) return cmd_plot(report, plot_out, common.quiet);
    for (auto& [name, sub] : subs) {
      if (sub->parsed()) return commands.at(name)(common);
    }
  } catch (const std::exception& e) {
    std::cerr << "mftg: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
