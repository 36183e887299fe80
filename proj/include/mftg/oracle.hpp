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

// Infinite-population mean-field propagation, identical team policies, and
// the closed-form constrained RPS solution.

#include <functional>

#include "mftg/envs.hpp"
#include "mftg/parallel.hpp"

namespace mftg {

// Identical team policy: action distribution of an agent at `state` given
// both team mean-fields at time t.
using Policy =
    std::function<std::vector<double>(std::size_t state, const Dist& mu, const Dist& nu, int t)>;

inline Policy uniform_policy(std::size_t actions) {
  return [actions](std::size_t, const Dist&, const Dist&, int) {
    return std::vector<double>(actions, 1.0 / static_cast<double>(actions));
  };
}

inline Policy constant_policy(std::vector<double> probs) {
  return [probs = std::move(probs)](std::size_t, const Dist&, const Dist&, int) { return probs; };
}

struct PolicyPair {
  Policy blue;
  Policy red;
};

// Per-state action table of `policy` for `team`. Only states carrying mass
// in `own` and able to act are evaluated; the remaining rows place all mass
// on the last action.
inline ActionTable policy_table(const Environment& env, Team team, const Policy& policy,
                                const Dist& own, const Dist& mu, const Dist& nu, int t) {
  const std::size_t actions = env.action_count(team);
  std::vector<double> idle(actions, 0.0);
  idle.back() = 1.0;
  ActionTable table(own.size(), idle);
  for (std::size_t x = 0; x < own.size(); ++x) {
    if (own[x] == 0.0 || !env.can_act(team, x)) continue;
    auto row = policy(x, mu, nu, t);
    if (row.size() != actions) throw Error("policy returned wrong number of actions");
    table[x] = std::move(row);
  }
  return table;
}

// mu'(x') = sum_x sum_u f(x'|x,u,mu,nu) phi(u|x) mu(x) with an explicit kernel.
using Kernel = std::function<std::vector<double>(std::size_t state, std::size_t action)>;

inline Dist propagate_mean_field(const Dist& own, const ActionTable& table, const Kernel& kernel) {
  std::vector<double> next(own.size(), 0.0);
  for (std::size_t x = 0; x < own.size(); ++x) {
    if (own[x] == 0.0) continue;
    for (std::size_t u = 0; u < table.at(x).size(); ++u) {
      const double w = table[x][u] * own[x];
      if (w == 0.0) continue;
      const auto row = kernel(x, u);
      if (row.size() != own.size()) throw Error("kernel row has wrong dimension");
      double total = 0.0;
      for (double p : row) total += p;
      if (std::abs(total - 1.0) > kDistTolerance) throw Error("kernel row does not sum to 1");
      for (std::size_t y = 0; y < row.size(); ++y) next[y] += row[y] * w;
    }
  }
  return Dist(std::move(next));
}

// One joint step of both mean-fields through the environment's kernel.
inline std::pair<Dist, Dist> propagate_mean_field(const Environment& env, const Dist& mu,
                                                  const Dist& nu, const PolicyPair& pair, int t) {
  const auto blue = policy_table(env, Team::Blue, pair.blue, mu, mu, nu, t);
  const auto red = policy_table(env, Team::Red, pair.red, nu, mu, nu, t);
  return env.propagate(mu, nu, blue, red);
}

struct MeanFieldTrajectory {
  std::vector<Dist> mus;
  std::vector<Dist> nus;
  std::vector<double> rewards;  // rewards[t] earned on t -> t+1
  double cumulative_value = 0.0;
};

inline MeanFieldTrajectory rollout_infinite(const Environment& env, const Dist& mu0,
                                            const Dist& nu0, const PolicyPair& pair, int horizon) {
  MeanFieldTrajectory traj;
  traj.mus.push_back(mu0);
  traj.nus.push_back(nu0);
  for (int t = 0; t < horizon; ++t) {
    auto [mu, nu] = propagate_mean_field(env, traj.mus.back(), traj.nus.back(), pair, t);
    const double r = env.reward(traj.mus.back(), traj.nus.back(), mu, nu);
    traj.rewards.push_back(r);
    traj.cumulative_value += r;
    traj.mus.push_back(std::move(mu));
    traj.nus.push_back(std::move(nu));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Constrained RPS closed form. Actions are {0: CW, 1: Stay}.

inline Dist crps_initial_blue() { return Dist::one_hot(3, kRock); }
inline Dist crps_initial_red() { return Dist::one_hot(3, kPaper); }

inline PolicyPair crps_analytical_policy_pair(const Dist& mu0 = crps_initial_blue(),
                                              const Dist& nu0 = crps_initial_red()) {
  if (tv_distance(mu0, crps_initial_blue()) > kDistTolerance ||
      tv_distance(nu0, crps_initial_red()) > kDistTolerance) {
    throw Error("analytical solution defined only for the paper's initialization");
  }
  auto cw = [](double p) { return std::vector<double>{p, 1.0 - p}; };
  PolicyPair pair;
  // mu_1 = [1/2, 1/2, 0], then split R and P to reach the uniform field.
  pair.blue = [cw](std::size_t x, const Dist&, const Dist&, int t) {
    if (t == 0) return x == kRock ? cw(0.5) : cw(0.0);
    if (t == 1) {
      if (x == kRock) return cw(1.0 / 3.0);
      if (x == kPaper) return cw(2.0 / 3.0);
    }
    return cw(0.0);
  };
  // nu_1 = [0, 2/3, 1/3], then one third of P and all of S rotate.
  pair.red = [cw](std::size_t x, const Dist&, const Dist&, int t) {
    if (t == 0) return x == kPaper ? cw(1.0 / 3.0) : cw(0.0);
    if (t == 1) {
      if (x == kPaper) return cw(0.5);
      if (x == kScissors) return cw(1.0);
    }
    return cw(0.0);
  };
  return pair;
}

// ---------------------------------------------------------------------------
// Finite-population sampling of identical policies.

// Draws one action per agent; exactly one uniform is consumed per agent.
inline std::vector<std::size_t> sample_team_actions(const JointTeamState& team,
                                                    const ActionTable& table, Rng& rng) {
  std::vector<std::size_t> actions(team.size());
  for (std::size_t i = 0; i < team.size(); ++i) {
    actions[i] = sample_categorical(table.at(team.agent_states[i]), rng);
  }
  return actions;
}

struct GapRow {
  std::size_t n = 0;
  double mean_gap = 0.0;
  double std_error = 0.0;
  double bound = 0.0;  // |X|/2 * sqrt(1/N)
};

// One-step TV distance between the finite Blue ED after a step and the
// oracle propagation of the pre-step ED, for every N. Both teams use N agents.
inline std::vector<GapRow> mf_approx_gap(const Environment& env, const PolicyPair& pair,
                                         const std::vector<std::size_t>& n_list,
                                         std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw Error("mf_approx_gap needs at least 2 trials");
  if (!std::is_sorted(n_list.begin(), n_list.end())) throw Error("N list must be ascending");
  const double states = static_cast<double>(env.spec().blue_space_size);
  std::vector<GapRow> rows;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const std::size_t n = n_list[k];
    std::vector<double> gaps(trials);
    parallel_for(trials, [&](std::size_t i) {
      Rng rng(derive_seed(seed, "mf_gap", k * trials + i));
      const auto [blue, red] = env.initial_states(n, env.single_team() ? 0 : n, rng);
      const Dist mu = team_distribution(blue);
      const Dist nu = team_distribution(red);
      const auto bt = policy_table(env, Team::Blue, pair.blue, mu, mu, nu, 0);
      const auto rt = policy_table(env, Team::Red, pair.red, nu, mu, nu, 0);
      const auto ba = sample_team_actions(blue, bt, rng);
      const auto ra = sample_team_actions(red, rt, rng);
      const auto step = env.step(blue, red, ba, ra, 0, rng);
      const auto oracle = env.propagate(mu, nu, bt, rt);
      gaps[i] = tv_distance(team_distribution(step.next_blue), oracle.first);
    });
    const MeanStat s = mean_stat(gaps);
    rows.push_back({n, s.mean, s.std_error, states / 2.0 * std::sqrt(1.0 / static_cast<double>(n))});
  }
  return rows;
}

// Least-squares slope of log(mean gap) against log(N).
inline LinearFit gap_loglog_fit(const std::vector<GapRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.mean_gap <= 0.0) throw Error("gap is zero; log-log fit undefined");
    x.push_back(std::log(static_cast<double>(r.n)));
    y.push_back(std::log(r.mean_gap));
  }
  return fit_line(x, y);
}

}  // namespace mftg
