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

// Cross-play tables, the cRPS Nash gap, deployment to larger populations and
// report serialization.

#include <nlohmann/json.hpp>

#include "mftg/dpc.hpp"
#include "mftg/mappo.hpp"

namespace mftg {

inline constexpr const char* kReportSchema = "mftg-report-1";

struct NamedPolicy {
  std::string name;
  Policy policy;
};

struct CrossPlayCell {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t episodes = 0;
};

// cells[r][b]: Red policy r (row) against Blue policy b (column).
struct CrossPlayTable {
  std::vector<std::string> red_names;
  std::vector<std::string> blue_names;
  std::vector<std::vector<CrossPlayCell>> cells;
};

// Every cell replays the same episode seeds, so differences between cells
// are paired.
inline CrossPlayTable crossplay(const Environment& env, const std::vector<NamedPolicy>& blue,
                                const std::vector<NamedPolicy>& red, std::size_t episodes,
                                std::size_t n_blue, std::size_t n_red, std::uint64_t seed) {
  if (blue.size() < 2 || red.size() < 2) throw Error("cross-play needs at least 2 policies per side");
  CrossPlayTable table;
  for (const auto& p : red) table.red_names.push_back(p.name);
  for (const auto& p : blue) table.blue_names.push_back(p.name);
  for (const auto& r : red) {
    auto& row = table.cells.emplace_back();
    for (const auto& b : blue) {
      const auto e = evaluate_policy_pair(env, {b.policy, r.policy}, episodes, n_blue, n_red, seed);
      row.push_back({e.stats.mean, e.stats.std_error, episodes});
    }
  }
  return table;
}

struct NashGap {
  double value_gap = 0.0;  // |J - (-1/3)|
  double field_gap = 0.0;  // max over t >= 2 of TV(mu_t, u) + TV(nu_t, u)
};

inline NashGap nash_gap_crps(const MeanFieldTrajectory& traj) {
  if (traj.mus.empty() || tv_distance(traj.mus[0], crps_initial_blue()) > kDistTolerance ||
      tv_distance(traj.nus[0], crps_initial_red()) > kDistTolerance) {
    throw Error("Nash gap defined only for the paper's initialization");
  }
  NashGap g;
  g.value_gap = std::abs(traj.cumulative_value + 1.0 / 3.0);
  const Dist u = Dist::uniform(3);
  for (std::size_t t = 2; t < traj.mus.size(); ++t) {
    g.field_gap = std::max(g.field_gap, tv_distance(traj.mus[t], u) + tv_distance(traj.nus[t], u));
  }
  return g;
}

struct ScalingRow {
  std::size_t n_blue = 0;
  std::size_t n_red = 0;
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double tv_to_oracle = 0.0;  // mean over episodes and steps of TV(mu^N_t, mu_t)
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  bool monotone_variance = true;  // variance strictly decreasing in N
};

// Deploys a pair trained at (train_blue, train_red) to each population in
// `deploy`. The oracle trajectory starts from each episode's initial EDs.
inline ScalingReport scaling_eval(const Environment& env, const PolicyPair& pair,
                                  std::size_t train_blue, std::size_t train_red,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& deploy,
                                  std::size_t episodes, std::uint64_t seed) {
  if (episodes < 2) throw Error("scaling evaluation needs at least 2 episodes");
  ScalingReport report;
  for (std::size_t i = 0; i < deploy.size(); ++i) {
    const auto [nb, nr] = deploy[i];
    if (nb * train_red != nr * train_blue) throw Error("ratio mismatch: deploy N1/N2 must equal training N1/N2");
    if (i > 0 && nb <= deploy[i - 1].first) throw Error("deployment sizes must be strictly increasing");
    std::vector<double> returns(episodes), tv(episodes);
    parallel_for(episodes, [&](std::size_t k) {
      Rng rng(derive_seed(seed, "eval_episode", k));
      const auto ep = run_episode(env, pair, nb, nr, rng, true);
      returns[k] = ep.blue_return;
      const auto oracle = rollout_infinite(env, ep.mus[0], ep.nus[0], pair, ep.length);
      double sum = 0.0;
      for (std::size_t t = 0; t < ep.mus.size(); ++t) sum += tv_distance(ep.mus[t], oracle.mus[t]);
      tv[k] = sum / static_cast<double>(ep.mus.size());
    });
    const auto s = mean_stat(returns);
    report.rows.push_back({nb, nr, s.mean, s.variance, s.std_error, mean_stat(tv).mean});
    if (i > 0 && !(s.variance < report.rows[i - 1].variance)) report.monotone_variance = false;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json report_header(const std::string& kind) {
  return {{"schema", kReportSchema}, {"kind", kind}};
}

inline nlohmann::json to_json(const CrossPlayTable& t) {
  auto j = report_header("crossplay");
  j["red"] = t.red_names;
  j["blue"] = t.blue_names;
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& row : t.cells) {
    auto& out = cells.emplace_back(nlohmann::json::array());
    for (const auto& c : row) out.push_back({{"mean", c.mean}, {"std_error", c.std_error}, {"episodes", c.episodes}});
  }
  return j;
}

inline std::string crossplay_csv(const CrossPlayTable& t) {
  std::ostringstream os;
  os.precision(12);
  os << "red,blue,mean,std_error,episodes\n";
  for (std::size_t r = 0; r < t.red_names.size(); ++r) {
    for (std::size_t b = 0; b < t.blue_names.size(); ++b) {
      const auto& c = t.cells[r][b];
      os << t.red_names[r] << ',' << t.blue_names[b] << ',' << c.mean << ',' << c.std_error << ','
         << c.episodes << '\n';
    }
  }
  return os.str();
}

inline nlohmann::json to_json(const ScalingReport& s) {
  auto j = report_header("scaling");
  j["monotone_variance"] = s.monotone_variance;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"n_blue", r.n_blue}, {"n_red", r.n_red}, {"mean", r.mean}, {"variance", r.variance},
                    {"std_error", r.std_error}, {"tv_to_oracle", r.tv_to_oracle}});
  }
  return j;
}

inline std::string scaling_csv(const ScalingReport& s) {
  std::ostringstream os;
  os.precision(12);
  os << "n_blue,n_red,mean,variance,std_error,tv_to_oracle\n";
  for (const auto& r : s.rows) {
    os << r.n_blue << ',' << r.n_red << ',' << r.mean << ',' << r.variance << ',' << r.std_error << ','
       << r.tv_to_oracle << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const EvalResult& e) {
  auto j = report_header("evaluation");
  j["mean"] = e.stats.mean;
  j["variance"] = e.stats.variance;
  j["std_error"] = e.stats.std_error;
  j["episodes"] = e.stats.count;
  j["mean_length"] = e.mean_length;
  j["returns"] = e.returns;
  return j;
}

inline nlohmann::json to_json(const std::vector<GapRow>& rows, const LinearFit& fit) {
  auto j = report_header("mf_gap");
  j["slope"] = fit.slope;
  j["r_squared"] = fit.r_squared;
  auto& out = j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"n", r.n}, {"mean_gap", r.mean_gap}, {"std_error", r.std_error}, {"bound", r.bound}});
  }
  return j;
}

// Ternary-plot friendly dump of recorded cRPS trajectories.
inline std::string trajectory_csv(const std::vector<EpisodeResult>& episodes) {
  std::ostringstream os;
  os.precision(12);
  os << "episode,t,team,p0,p1,p2\n";
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    for (std::size_t t = 0; t < episodes[k].mus.size(); ++t) {
      for (int team = 0; team < 2; ++team) {
        const Dist& d = team == 0 ? episodes[k].mus[t] : episodes[k].nus[t];
        if (d.size() != 3) throw Error("trajectory dump needs a 3-state space");
        os << k << ',' << t << ',' << (team == 0 ? "blue" : "red") << ',' << d[0] << ',' << d[1] << ','
           << d[2] << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace mftg
