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

// Decentralized opponent mean-field estimation: visibility and communication
// graphs, Metropolis weights, projected consensus and the uniform-fill
// benchmark.

#include <deque>
#include <map>
#include <optional>
#include <sstream>

#include "mftg/oracle.hpp"

namespace mftg {

// visible[x] lists the opponent states observed exactly by agents at own
// state x.
struct VisibilityGraph {
  std::size_t opponent_space = 0;
  std::vector<std::vector<std::size_t>> visible;
};

// Agents see the opponent mass on their own grid cell. States are encoded as
// cell + k * cells, so both navigation cells and battlefield (cell, status)
// pairs are covered.
inline VisibilityGraph cell_visibility(std::size_t own_space, std::size_t opponent_space,
                                       std::size_t cells) {
  if (cells == 0) throw Error("cell count must be positive");
  VisibilityGraph g{opponent_space, std::vector<std::vector<std::size_t>>(own_space)};
  for (std::size_t x = 0; x < own_space; ++x) {
    for (std::size_t y = x % cells; y < opponent_space; y += cells) g.visible[x].push_back(y);
  }
  return g;
}

// Agents see every opponent state whose cell is within Chebyshev distance
// radius of their own cell on a grid_n x grid_n grid. Radius 0 reduces to
// cell_visibility.
inline VisibilityGraph range_visibility(std::size_t own_space, std::size_t opponent_space,
                                        std::size_t grid_n, std::size_t radius) {
  if (grid_n == 0) throw Error("grid side must be positive");
  const std::size_t cells = grid_n * grid_n;
  VisibilityGraph g{opponent_space, std::vector<std::vector<std::size_t>>(own_space)};
  auto dist = [&](std::size_t a, std::size_t b) {
    const auto dr = a / grid_n > b / grid_n ? a / grid_n - b / grid_n : b / grid_n - a / grid_n;
    const auto dc = a % grid_n > b % grid_n ? a % grid_n - b % grid_n : b % grid_n - a % grid_n;
    return std::max(dr, dc);
  };
  for (std::size_t x = 0; x < own_space; ++x) {
    for (std::size_t y = 0; y < opponent_space; ++y) {
      if (dist(x % cells, y % cells) <= radius) g.visible[x].push_back(y);
    }
  }
  return g;
}

inline VisibilityGraph no_visibility(std::size_t own_space, std::size_t opponent_space) {
  return {opponent_space, std::vector<std::vector<std::size_t>>(own_space)};
}

inline VisibilityGraph full_visibility(std::size_t own_space, std::size_t opponent_space) {
  std::vector<std::size_t> all(opponent_space);
  for (std::size_t y = 0; y < opponent_space; ++y) all[y] = y;
  return {opponent_space, std::vector<std::vector<std::size_t>>(own_space, all)};
}

// Undirected graph over the occupied own states. nodes is sorted; adjacency
// refers to positions in nodes.
struct CommGraph {
  std::vector<std::size_t> nodes;
  std::vector<std::vector<std::size_t>> adjacency;

  std::size_t size() const { return nodes.size(); }
  std::size_t degree(std::size_t i) const { return adjacency[i].size(); }

  // Hop counts from node i (SIZE_MAX for unreachable nodes).
  std::vector<std::size_t> hops_from(std::size_t i) const {
    std::vector<std::size_t> dist(size(), SIZE_MAX);
    std::deque<std::size_t> queue{i};
    dist[i] = 0;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      for (std::size_t w : adjacency[v]) {
        if (dist[w] == SIZE_MAX) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
      }
    }
    return dist;
  }

  bool connected() const {
    if (size() == 0) return false;
    const auto d = hops_from(0);
    return std::find(d.begin(), d.end(), SIZE_MAX) == d.end();
  }

  std::size_t diameter() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t d : hops_from(i)) {
        if (d == SIZE_MAX) throw Error("Assumption 2 violated: communication graph disconnected");
        best = std::max(best, d);
      }
    }
    return best;
  }
};

inline CommGraph make_comm_graph(std::vector<std::size_t> nodes,
                                 const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::sort(nodes.begin(), nodes.end());
  if (std::adjacent_find(nodes.begin(), nodes.end()) != nodes.end()) {
    throw Error("duplicate communication node");
  }
  CommGraph g{nodes, std::vector<std::vector<std::size_t>>(nodes.size())};
  auto index = [&](std::size_t s) {
    auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), s);
    if (it == g.nodes.end() || *it != s) throw Error("edge references unoccupied state");
    return static_cast<std::size_t>(it - g.nodes.begin());
  };
  for (auto [a, b] : edges) {
    const std::size_t i = index(a), j = index(b);
    if (i == j) continue;
    if (std::find(g.adjacency[i].begin(), g.adjacency[i].end(), j) != g.adjacency[i].end()) continue;
    g.adjacency[i].push_back(j);
    g.adjacency[j].push_back(i);
  }
  for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
  return g;
}

enum class Connectivity { Abort, Bridge };

// States communicate when their grid cells (state % grid_n^2) are within
// Chebyshev distance 1, i.e. the 3x3 block around a cell. A disconnected
// result aborts, or with Connectivity::Bridge is joined by repeatedly linking
// the closest pair of states across the component of the first node.
inline CommGraph subgrid_comm_graph(std::size_t grid_n, std::vector<std::size_t> occupied,
                                    Connectivity mode = Connectivity::Abort) {
  if (grid_n < 2) throw Error("grid side must be >= 2");
  if (occupied.empty()) throw Error("no occupied states");
  std::sort(occupied.begin(), occupied.end());
  const std::size_t cells = grid_n * grid_n;
  auto chebyshev = [&](std::size_t s, std::size_t t) {
    const std::size_t a = s % cells, b = t % cells;
    const auto dr = std::abs(static_cast<long>(a / grid_n) - static_cast<long>(b / grid_n));
    const auto dc = std::abs(static_cast<long>(a % grid_n) - static_cast<long>(b % grid_n));
    return std::max(dr, dc);
  };
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < occupied.size(); ++i) {
    for (std::size_t j = i + 1; j < occupied.size(); ++j) {
      if (chebyshev(occupied[i], occupied[j]) <= 1) edges.emplace_back(occupied[i], occupied[j]);
    }
  }
  auto g = make_comm_graph(occupied, edges);
  while (!g.connected()) {
    if (mode == Connectivity::Abort) {
      throw Error("Assumption 2 violated: communication graph disconnected");
    }
    const auto hops = g.hops_from(0);
    std::pair<std::size_t, std::size_t> best;
    long best_d = std::numeric_limits<long>::max();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (hops[i] == SIZE_MAX) continue;
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (hops[j] != SIZE_MAX) continue;
        const long d = chebyshev(g.nodes[i], g.nodes[j]);
        if (d < best_d) best_d = d, best = {g.nodes[i], g.nodes[j]};
      }
    }
    edges.push_back(best);
    g = make_comm_graph(occupied, edges);
  }
  return g;
}

using WeightMatrix = std::vector<std::vector<double>>;

inline WeightMatrix metropolis_weights(const CommGraph& g) {
  if (!g.connected()) throw Error("Assumption 2 violated: communication graph disconnected");
  const std::size_t n = g.size();
  WeightMatrix w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : g.adjacency[i]) {
      w[i][j] = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j : g.adjacency[i]) off += w[i][j];
    w[i][i] = 1.0 - off;
  }
  return w;
}

// Smallest non-zero weight.
inline double min_nonzero_weight(const WeightMatrix& w) {
  double best = 1.0;
  for (const auto& row : w) {
    for (double v : row) {
      if (v > 0.0) best = std::min(best, v);
    }
  }
  return best;
}

inline ConstraintSet build_constraint_set(std::size_t x, const VisibilityGraph& viz,
                                          const Dist& observed) {
  if (observed.size() != viz.opponent_space) throw Error("observation has wrong dimension");
  std::map<std::size_t, double> pinned;
  for (std::size_t y : viz.visible.at(x)) pinned[y] = observed[y];
  return ConstraintSet(std::move(pinned));
}

// Estimate per occupied own state, keyed by state.
using EstimateBank = std::map<std::size_t, Dist>;
using ConstraintMap = std::map<std::size_t, ConstraintSet>;

// Zero-mean Gaussian perturbation of every estimate; the result is no longer
// a distribution, so it is returned as raw vectors.
inline std::map<std::size_t, std::vector<double>> inject_channel_noise(const EstimateBank& bank,
                                                                      double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw Error("noise sigma must be >= 0");
  std::map<std::size_t, std::vector<double>> out;
  for (const auto& [x, est] : bank) {
    auto v = est.probs();
    if (sigma > 0.0) {
      for (double& p : v) p += sigma * rng.normal();
    }
    out.emplace(x, std::move(v));
  }
  return out;
}

// One synchronous round: gather xi = W * estimates from the current bank,
// then commit the projections. Transmitted neighbor estimates carry channel
// noise when sigma > 0; an agent's own estimate does not.
inline EstimateBank dpc_round(const EstimateBank& bank, const CommGraph& g, const WeightMatrix& w,
                              const ConstraintMap* constraints, double sigma = 0.0,
                              Rng* rng = nullptr) {
  if (bank.size() != g.size()) throw Error("estimate bank does not match communication graph");
  std::vector<const std::vector<double>*> own(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto it = bank.find(g.nodes[i]);
    if (it == bank.end()) throw Error("estimate bank does not match communication graph");
    own[i] = &it->second.probs();
  }
  std::map<std::size_t, std::vector<double>> noisy;
  if (sigma > 0.0) {
    if (rng == nullptr) throw Error("channel noise requires a generator");
    noisy = inject_channel_noise(bank, sigma, *rng);
  }
  EstimateBank next;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<double> xi(own[i]->size(), 0.0);
    for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = w[i][i] * (*own[i])[k];
    for (std::size_t j : g.adjacency[i]) {
      const auto& src = sigma == 0.0 ? *own[j] : noisy.at(g.nodes[j]);
      for (std::size_t k = 0; k < xi.size(); ++k) xi[k] += w[i][j] * src[k];
    }
    const std::size_t x = g.nodes[i];
    if (constraints != nullptr) {
      next.emplace(x, project_constrained_simplex(xi, constraints->at(x)));
    } else {
      next.emplace(x, Dist(std::move(xi)));
    }
  }
  return next;
}

// Inputs shared by both estimators at one timestep.
struct EstimationProblem {
  Dist truth;                          // opponent distribution being estimated
  std::vector<std::size_t> occupied;   // own states with at least one agent
  const VisibilityGraph* viz = nullptr;
  std::size_t grid_n = 0;              // subgrid communication side length
  Connectivity connectivity = Connectivity::Abort;
};

inline ConstraintMap build_constraints(const EstimationProblem& p) {
  ConstraintMap c;
  for (std::size_t x : p.occupied) c.emplace(x, build_constraint_set(x, *p.viz, p.truth));
  return c;
}

// Uniform draw from R(x): pinned coordinates plus a flat Dirichlet over the
// free coordinates.
inline Dist sample_from_constraint_set(const ConstraintSet& c, std::size_t dim, Rng& rng) {
  std::vector<double> v(dim, 0.0);
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < dim; ++i) {
    if (c.is_pinned(i)) {
      v[i] = c.pinned().at(i);
    } else {
      free_idx.push_back(i);
    }
  }
  if (!free_idx.empty()) {
    const auto w = sample_flat_dirichlet(free_idx.size(), c.free_mass(), rng);
    for (std::size_t k = 0; k < free_idx.size(); ++k) v[free_idx[k]] = w[k];
  }
  return Dist(std::move(v));
}

struct EstimateOptions {
  int rounds = 1;
  double sigma = 0.0;
};

// Warm start: the previous estimate at x projected onto the new R(x). States
// that were unoccupied at the previous step start from the mean of the
// previous bank. Without a previous bank every state draws from R(x).
inline EstimateBank dpc_estimate(const EstimationProblem& p, const EstimateOptions& opt,
                                 const EstimateBank* previous, Rng& rng) {
  if (opt.rounds < 0) throw Error("communication rounds must be >= 0");
  const auto g = subgrid_comm_graph(p.grid_n, p.occupied, p.connectivity);
  const auto constraints = build_constraints(p);
  EstimateBank bank;
  std::optional<std::vector<double>> prev_mean;
  if (previous != nullptr && !previous->empty()) {
    std::vector<double> m(p.truth.size(), 0.0);
    for (const auto& [x, est] : *previous) {
      for (std::size_t k = 0; k < m.size(); ++k) m[k] += est[k] / static_cast<double>(previous->size());
    }
    prev_mean = std::move(m);
  }
  for (std::size_t x : g.nodes) {
    const auto& c = constraints.at(x);
    if (previous != nullptr && previous->contains(x)) {
      bank.emplace(x, project_constrained_simplex(previous->at(x).span(), c));
    } else if (prev_mean) {
      bank.emplace(x, project_constrained_simplex(*prev_mean, c));
    } else {
      bank.emplace(x, sample_from_constraint_set(c, p.truth.size(), rng));
    }
  }
  if (opt.rounds == 0) return bank;
  const auto w = metropolis_weights(g);
  for (int r = 0; r < opt.rounds; ++r) bank = dpc_round(bank, g, w, &constraints, opt.sigma, &rng);
  return bank;
}

// Each state collects the exact observations of every state within `rounds`
// hops; opponent states nobody in range observes share the residual mass
// equally.
inline EstimateBank benchmark_estimate(const EstimationProblem& p, const EstimateOptions& opt) {
  if (opt.rounds < 0) throw Error("communication rounds must be >= 0");
  const auto g = subgrid_comm_graph(p.grid_n, p.occupied, p.connectivity);
  const std::size_t dim = p.truth.size();
  EstimateBank bank;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto hops = g.hops_from(i);
    std::vector<bool> seen(dim, false);
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (hops[j] > static_cast<std::size_t>(opt.rounds)) continue;
      for (std::size_t y : p.viz->visible.at(g.nodes[j])) seen[y] = true;
    }
    std::vector<double> v(dim, 0.0);
    double residual = 1.0;
    std::size_t unseen = 0;
    for (std::size_t y = 0; y < dim; ++y) {
      if (seen[y]) {
        v[y] = p.truth[y];
        residual -= p.truth[y];
      } else {
        ++unseen;
      }
    }
    residual = std::max(0.0, residual);
    for (std::size_t y = 0; y < dim; ++y) {
      if (!seen[y]) v[y] = residual / static_cast<double>(unseen);
    }
    if (unseen == 0) v = p.truth.probs();
    bank.emplace(g.nodes[i], Dist(std::move(v)));
  }
  return bank;
}

struct EstimateError {
  double max_tv = 0.0;
  double mean_tv = 0.0;  // weighted by own-team mass
};

inline EstimateError estimate_error(const EstimateBank& bank, const Dist& truth, const Dist& own) {
  EstimateError e;
  double mass = 0.0;
  for (const auto& [x, est] : bank) {
    const double tv = tv_distance(est, truth);
    e.max_tv = std::max(e.max_tv, tv);
    e.mean_tv += own[x] * tv;
    mass += own[x];
  }
  if (mass > 0.0) e.mean_tv /= mass;
  return e;
}

inline std::vector<std::size_t> occupied_states(const Dist& d, double threshold = 0.0) {
  std::vector<std::size_t> s;
  for (std::size_t x = 0; x < d.size(); ++x) {
    if (d[x] > threshold) s.push_back(x);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Traces

enum class Estimator { DPC, Benchmark };

inline std::string estimator_name(Estimator e) { return e == Estimator::DPC ? "dpc" : "benchmark"; }

inline Estimator parse_estimator(const std::string& s) {
  if (s == "dpc") return Estimator::DPC;
  if (s == "benchmark") return Estimator::Benchmark;
  throw Error("unknown estimator '" + s + "'");
}

struct TraceRow {
  int t = 0;
  int rounds = 0;
  Estimator estimator = Estimator::DPC;
  std::uint64_t seed = 0;
  double max_tv_error = 0.0;
  double mean_tv_error = 0.0;
  double regret_partial_sum = 0.0;
};

inline constexpr const char* kTraceHeader =
    "t,R_com,estimator,seed,max_tv_error,mean_tv_error,regret_partial_sum";

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << kTraceHeader << '\n';
  for (const auto& r : rows) {
    os << r.t << ',' << r.rounds << ',' << estimator_name(r.estimator) << ',' << r.seed << ','
       << r.max_tv_error << ',' << r.mean_tv_error << ',' << r.regret_partial_sum << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Navigation estimation runs. The single team estimates its own distribution
// while following `policy`; agents see the mass of their own cell.

struct NavigationRunConfig {
  int horizon = 50;
  int rounds = 1;
  Estimator estimator = Estimator::DPC;
  double sigma = 0.0;
};

inline EstimateBank run_estimator(Estimator kind, const EstimationProblem& p,
                                  const EstimateOptions& opt, const EstimateBank* previous, Rng& rng) {
  return kind == Estimator::DPC ? dpc_estimate(p, opt, previous, rng) : benchmark_estimate(p, opt);
}

// Infinite-population run: the mean-field evolves through the oracle and
// every state in its support is occupied.
inline std::vector<TraceRow> navigation_estimation_infinite(const NavigationEnv& env,
                                                            const Policy& policy, const Dist& mu0,
                                                            const NavigationRunConfig& cfg,
                                                            std::uint64_t seed) {
  const auto viz = cell_visibility(mu0.size(), mu0.size(), env.map().cells());
  Rng rng(derive_seed(seed, "estimation", 0));
  const PolicyPair pair{policy, uniform_policy(1)};
  const Dist none = Dist::one_hot(1, 0);
  Dist mu = mu0;
  EstimateBank bank;
  std::vector<TraceRow> rows;
  for (int t = 0; t < cfg.horizon; ++t) {
    const EstimationProblem p{mu, occupied_states(mu, 1e-12), &viz, env.map().n};
    bank = run_estimator(cfg.estimator, p, {cfg.rounds, cfg.sigma}, t == 0 ? nullptr : &bank, rng);
    const auto e = estimate_error(bank, mu, mu);
    rows.push_back({t, cfg.rounds, cfg.estimator, seed, e.max_tv, e.mean_tv, 0.0});
    mu = propagate_mean_field(env, mu, none, pair, t).first;
  }
  return rows;
}

// Finite-population run with N agents drawn from the environment's random
// initialization.
inline std::vector<TraceRow> navigation_estimation_finite(const NavigationEnv& env,
                                                          const Policy& policy, std::size_t n,
                                                          const NavigationRunConfig& cfg,
                                                          std::uint64_t seed) {
  const std::size_t cells = env.map().cells();
  const auto viz = cell_visibility(cells, cells, cells);
  Rng rng(derive_seed(seed, "rollout", 0));
  Rng est_rng(derive_seed(seed, "estimation", 0));
  auto [team, none_team] = env.initial_states(n, 0, rng);
  const Dist none = Dist::one_hot(1, 0);
  EstimateBank bank;
  std::vector<TraceRow> rows;
  for (int t = 0; t < cfg.horizon; ++t) {
    const Dist mu = empirical_distribution(team);
    const EstimationProblem p{mu, occupied_states(mu), &viz, env.map().n};
    bank = run_estimator(cfg.estimator, p, {cfg.rounds, cfg.sigma}, t == 0 ? nullptr : &bank,
                         est_rng);
    const auto e = estimate_error(bank, mu, mu);
    rows.push_back({t, cfg.rounds, cfg.estimator, seed, e.max_tv, e.mean_tv, 0.0});
    const auto table = policy_table(env, Team::Blue, policy, mu, mu, none, t);
    const auto actions = sample_team_actions(team, table, rng);
    team = env.step(team, none_team, actions, {}, t, rng).next_blue;
  }
  return rows;
}

// Moves toward the target region with probability `greed`, picks a uniformly
// random action with probability `explore` and otherwise stays.
inline Policy navigation_greedy_policy(const GridMap& map, double greed, double explore) {
  if (greed < 0.0 || explore < 0.0 || greed + explore > 1.0 + 1e-12) {
    throw Error("navigation policy weights must be non-negative and sum to at most 1");
  }
  return [map, greed, explore](std::size_t x, const Dist&, const Dist&, int) {
    std::vector<double> p(kGridActions, explore / static_cast<double>(kGridActions));
    p[kStay] += std::max(0.0, 1.0 - greed - explore);
    const std::size_t here = map.target_distance(x);
    std::vector<std::size_t> better;
    for (std::size_t a = 0; a < kGridActions; ++a) {
      const auto nb = map.neighbor(x, a);
      if (nb && map.target_distance(*nb) < here) better.push_back(a);
    }
    if (better.empty()) better.push_back(kStay);
    for (std::size_t a : better) p[a] += greed / static_cast<double>(better.size());
    return p;
  };
}

// ---------------------------------------------------------------------------
// Regret of acting on estimated opponent fields.

struct RegretConfig {
  Estimator estimator = Estimator::DPC;
  int rounds = 1;
  double sigma = 0.0;
  std::size_t grid_n = 0;  // side of the grid carrying both teams' states
  std::size_t n_blue = 100;
  std::size_t n_red = 100;
  std::size_t episodes = 20;
  bool full_view = false;        // every team sees the whole opponent field
  std::size_t view_radius = 0;  // sensing range in cells, see range_visibility
  Connectivity connectivity = Connectivity::Bridge;
};

struct RegretResult {
  double delta_j = 0.0;           // mean |J_full - J_estimated| over episodes
  double full_return = 0.0;       // mean full-information Blue return
  double estimated_return = 0.0;  // mean estimated-information Blue return
  std::vector<double> deltas;
  std::vector<TraceRow> trace;    // Blue estimation error, averaged over episodes
};

namespace detail {

// Action table where agents at x act on their own team's true field and the
// estimate ed.at(x) of the opponent field.
inline ActionTable estimated_table(const Environment& env, Team team, const Policy& policy,
                                  const Dist& own, const Dist& mu, const Dist& nu,
                                  const EstimateBank& est, int t) {
  const std::size_t actions = env.action_count(team);
  std::vector<double> idle(actions, 0.0);
  idle.back() = 1.0;
  ActionTable table(own.size(), idle);
  for (const auto& [x, guess] : est) {
    if (!env.can_act(team, x)) continue;
    table[x] = team == Team::Blue ? policy(x, mu, guess, t) : policy(x, guess, nu, t);
    if (table[x].size() != actions) throw Error("policy returned wrong number of actions");
  }
  return table;
}

struct PairedEpisode {
  double full = 0.0;
  double estimated = 0.0;
  std::vector<EstimateError> errors;
  std::vector<double> partial;  // |cumulative full - cumulative estimated| per step
};

inline PairedEpisode paired_episode(const Environment& env, const PolicyPair& pair,
                                    const RegretConfig& cfg, std::uint64_t seed, std::size_t k) {
  const std::size_t bs = env.spec().blue_space_size, rs = env.spec().red_space_size;
  const auto blue_viz =
      cfg.full_view ? full_visibility(bs, rs) : range_visibility(bs, rs, cfg.grid_n, cfg.view_radius);
  const auto red_viz =
      cfg.full_view ? full_visibility(rs, bs) : range_visibility(rs, bs, cfg.grid_n, cfg.view_radius);
  Rng init(derive_seed(seed, "regret_init", k));
  const auto start = env.initial_states(cfg.n_blue, cfg.n_red, init);
  PairedEpisode ep;

  // Both runs replay the same generator seed so agent-level draws line up.
  auto run = [&](bool estimated) {
    Rng rng(derive_seed(seed, "regret_rollout", k));
    Rng est_rng(derive_seed(seed, "regret_estimate", k));
    auto [blue, red] = start;
    EstimateBank blue_bank, red_bank;
    std::vector<double> cumulative;
    double total = 0.0;
    for (int t = 0;; ++t) {
      const Dist mu = team_distribution(blue), nu = team_distribution(red);
      ActionTable bt, rt;
      if (estimated) {
        const EstimationProblem bp{nu, occupied_states(mu), &blue_viz, cfg.grid_n, cfg.connectivity};
        const EstimationProblem rp{mu, occupied_states(nu), &red_viz, cfg.grid_n, cfg.connectivity};
        const EstimateOptions opt{cfg.rounds, cfg.sigma};
        blue_bank = run_estimator(cfg.estimator, bp, opt, t == 0 ? nullptr : &blue_bank, est_rng);
        red_bank = run_estimator(cfg.estimator, rp, opt, t == 0 ? nullptr : &red_bank, est_rng);
        ep.errors.push_back(estimate_error(blue_bank, nu, mu));
        bt = estimated_table(env, Team::Blue, pair.blue, mu, mu, nu, blue_bank, t);
        rt = estimated_table(env, Team::Red, pair.red, nu, mu, nu, red_bank, t);
      } else {
        bt = policy_table(env, Team::Blue, pair.blue, mu, mu, nu, t);
        rt = policy_table(env, Team::Red, pair.red, nu, mu, nu, t);
      }
      const auto ba = sample_team_actions(blue, bt, rng);
      const auto ra = sample_team_actions(red, rt, rng);
      auto step = env.step(blue, red, ba, ra, t, rng);
      total += step.blue_reward;
      cumulative.push_back(total);
      blue = std::move(step.next_blue);
      red = std::move(step.next_red);
      if (step.done) break;
    }
    return cumulative;
  };
  const auto full = run(false);
  const auto est = run(true);
  ep.full = full.back();
  ep.estimated = est.back();
  for (std::size_t t = 0; t < est.size(); ++t) {
    ep.partial.push_back(std::abs(full[std::min(t, full.size() - 1)] - est[t]));
  }
  return ep;
}

}  // namespace detail

// Paired full- and estimated-information rollouts from identical initial
// joint states. Each team estimates the opponent field from its own cells.
inline RegretResult regret_delta_j(const Environment& env, const PolicyPair& pair,
                                   const RegretConfig& cfg, std::uint64_t seed) {
  if (cfg.episodes < 1) throw Error("episodes must be >= 1");
  if (cfg.grid_n < 2) throw Error("regret needs a grid environment");
  std::vector<detail::PairedEpisode> eps(cfg.episodes);
  parallel_for(cfg.episodes, [&](std::size_t k) { eps[k] = detail::paired_episode(env, pair, cfg, seed, k); });
  RegretResult r;
  std::size_t longest = 0;
  for (const auto& e : eps) {
    r.deltas.push_back(std::abs(e.full - e.estimated));
    r.full_return += e.full / static_cast<double>(cfg.episodes);
    r.estimated_return += e.estimated / static_cast<double>(cfg.episodes);
    longest = std::max(longest, e.errors.size());
  }
  r.delta_j = mean_stat(r.deltas).mean;
  for (std::size_t t = 0; t < longest; ++t) {
    TraceRow row{static_cast<int>(t), cfg.rounds, cfg.estimator, seed, 0.0, 0.0, 0.0};
    std::size_t count = 0;
    for (const auto& e : eps) {
      if (t >= e.errors.size()) continue;
      row.max_tv_error += e.errors[t].max_tv;
      row.mean_tv_error += e.errors[t].mean_tv;
      row.regret_partial_sum += e.partial[t];
      ++count;
    }
    row.max_tv_error /= static_cast<double>(count);
    row.mean_tv_error /= static_cast<double>(count);
    row.regret_partial_sum /= static_cast<double>(count);
    r.trace.push_back(row);
  }
  return r;
}

}  // namespace mftg
