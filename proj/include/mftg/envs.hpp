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

// Mean-field team environments. Every kernel is a function of an agent's own
// state and action plus the two team distributions; the same kernel object
// drives both the finite-population simulator (`step`) and the deterministic
// infinite-population propagation (`propagate`).

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "mftg/core.hpp"

namespace mftg {

enum class Team { Blue, Red };

inline const char* team_name(Team t) { return t == Team::Blue ? "blue" : "red"; }

struct EnvSpec {
  std::string name;
  std::size_t blue_space_size = 1;
  std::size_t red_space_size = 1;
  std::size_t blue_action_count = 1;
  std::size_t red_action_count = 1;
  int horizon = 1;
};

struct StepResult {
  JointTeamState next_blue;
  JointTeamState next_red;
  double blue_reward = 0.0;  // Red receives the negation.
  bool done = false;
};

// Per-state action distributions: table[state][action].
using ActionTable = std::vector<std::vector<double>>;

// Mean-field of a team; single-team environments use a one-point Red field.
inline Dist team_distribution(const JointTeamState& team) {
  if (team.empty() && team.space_size == 1) return Dist::one_hot(1, 0);
  return empirical_distribution(team);
}

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;

  // f(. | state, action, mu, nu) for the given team. Two-phase kernels
  // (battlefield) override propagate/step instead.
  virtual std::vector<double> transition(Team team, std::size_t state, std::size_t action,
                                         const Dist& mu, const Dist& nu) const {
    (void)team, (void)state, (void)action, (void)mu, (void)nu;
    throw Error(spec().name + ": kernel has no single-phase form");
  }

  // Team reward earned on the transition (mu, nu) -> (next_mu, next_nu).
  virtual double reward(const Dist& mu, const Dist& nu, const Dist& next_mu,
                        const Dist& next_nu) const = 0;

  virtual double max_abs_reward() const = 0;

  // Whether an agent in `state` chooses an action this step.
  virtual bool can_act(Team team, std::size_t state) const {
    (void)team, (void)state;
    return true;
  }

  virtual bool single_team() const { return false; }

  // Early termination beyond the horizon.
  virtual bool terminal(const JointTeamState& blue, const JointTeamState& red) const {
    (void)blue, (void)red;
    return false;
  }

  virtual std::pair<JointTeamState, JointTeamState> initial_states(std::size_t n_blue,
                                                                   std::size_t n_red,
                                                                   Rng& rng) const = 0;

  // Infinite-population step of both mean-fields under per-state action tables.
  virtual std::pair<Dist, Dist> propagate(const Dist& mu, const Dist& nu, const ActionTable& blue,
                                          const ActionTable& red) const {
    return {propagate_team(Team::Blue, mu, nu, blue), propagate_team(Team::Red, mu, nu, red)};
  }

  // Finite-population step from time t to t+1.
  virtual StepResult step(const JointTeamState& blue, const JointTeamState& red,
                          std::span<const std::size_t> blue_actions,
                          std::span<const std::size_t> red_actions, int t, Rng& rng) const {
    check_actions(blue, red, blue_actions, red_actions);
    const Dist mu = team_distribution(blue);
    const Dist nu = team_distribution(red);
    StepResult out;
    out.next_blue = sample_team(Team::Blue, blue, blue_actions, mu, nu, rng);
    out.next_red = sample_team(Team::Red, red, red_actions, mu, nu, rng);
    const Dist next_mu = team_distribution(out.next_blue);
    const Dist next_nu = team_distribution(out.next_red);
    out.blue_reward = reward(mu, nu, next_mu, next_nu);
    out.done = t + 1 >= spec().horizon || terminal(out.next_blue, out.next_red);
    return out;
  }

  std::size_t space_size(Team t) const {
    return t == Team::Blue ? spec().blue_space_size : spec().red_space_size;
  }
  std::size_t action_count(Team t) const {
    return t == Team::Blue ? spec().blue_action_count : spec().red_action_count;
  }

 protected:
  void check_actions(const JointTeamState& blue, const JointTeamState& red,
                     std::span<const std::size_t> blue_actions,
                     std::span<const std::size_t> red_actions) const {
    if (blue_actions.size() != blue.size() || red_actions.size() != red.size()) {
      throw Error("action count does not match team size");
    }
    for (std::size_t a : blue_actions) {
      if (a >= spec().blue_action_count) throw Error("malformed action index " + std::to_string(a));
    }
    for (std::size_t a : red_actions) {
      if (a >= spec().red_action_count) throw Error("malformed action index " + std::to_string(a));
    }
  }

  Dist propagate_team(Team team, const Dist& mu, const Dist& nu, const ActionTable& table) const {
    const Dist& own = team == Team::Blue ? mu : nu;
    std::vector<double> next(own.size(), 0.0);
    for (std::size_t x = 0; x < own.size(); ++x) {
      if (own[x] == 0.0) continue;
      for (std::size_t u = 0; u < table.at(x).size(); ++u) {
        const double w = table[x][u] * own[x];
        if (w == 0.0) continue;
        const auto row = transition(team, x, u, mu, nu);
        for (std::size_t y = 0; y < row.size(); ++y) next[y] += row[y] * w;
      }
    }
    return Dist(std::move(next));
  }

  JointTeamState sample_team(Team team, const JointTeamState& states,
                             std::span<const std::size_t> actions, const Dist& mu, const Dist& nu,
                             Rng& rng) const {
    const std::size_t n_actions = action_count(team);
    std::map<std::size_t, std::vector<double>> rows;  // keyed by state * n_actions + action
    std::vector<std::size_t> next(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      const std::size_t key = states.agent_states[i] * n_actions + actions[i];
      auto it = rows.find(key);
      if (it == rows.end()) {
        it = rows.emplace(key, transition(team, states.agent_states[i], actions[i], mu, nu)).first;
      }
      next[i] = sample_categorical(it->second, rng);
    }
    return JointTeamState(std::move(next), states.space_size);
  }
};

// ---------------------------------------------------------------------------
// Rock-paper-scissors and its constrained variant.

enum RpsState : std::size_t { kRock = 0, kPaper = 1, kScissors = 2 };
enum class RpsMove { CW, CCW, Stay };

inline double rps_payoff(std::size_t row, std::size_t col) {
  static constexpr double kA[3][3] = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
  return kA[row][col];
}

// mu^T A nu with Blue as the maximizing row player.
inline double rps_reward(const Dist& mu, const Dist& nu) {
  if (mu.size() != 3 || nu.size() != 3) throw Error("rps_reward expects distributions over {R,P,S}");
  double r = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) r += mu[i] * rps_payoff(i, j) * nu[j];
  }
  return r;
}

inline std::size_t crps_transition(std::size_t state, RpsMove move, bool constrained = true) {
  if (state > 2) throw Error("rps state out of range");
  switch (move) {
    case RpsMove::CW:
      return (state + 1) % 3;
    case RpsMove::CCW:
      if (constrained) throw Error("action not in constrained set");
      return (state + 2) % 3;
    case RpsMove::Stay:
      return state;
  }
  return state;
}

class RpsEnv : public Environment {
 public:
  // constrained: actions {CW, Stay}; otherwise {CW, CCW, Stay}.
  RpsEnv(bool constrained, int horizon) : constrained_(constrained) {
    spec_.name = constrained ? "crps" : "rps";
    spec_.blue_space_size = spec_.red_space_size = 3;
    spec_.blue_action_count = spec_.red_action_count = constrained ? 2 : 3;
    spec_.horizon = horizon;
    if (horizon < 1) throw Error("horizon must be >= 1");
  }

  const EnvSpec& spec() const override { return spec_; }
  bool constrained() const { return constrained_; }

  RpsMove move_of(std::size_t action) const {
    if (constrained_) {
      if (action > 1) throw Error("malformed action index " + std::to_string(action));
      return action == 0 ? RpsMove::CW : RpsMove::Stay;
    }
    if (action > 2) throw Error("malformed action index " + std::to_string(action));
    return static_cast<RpsMove>(action);
  }

  std::vector<double> transition(Team, std::size_t state, std::size_t action, const Dist&,
                                 const Dist&) const override {
    std::vector<double> row(3, 0.0);
    row[crps_transition(state, move_of(action), constrained_)] = 1.0;
    return row;
  }

  double reward(const Dist&, const Dist&, const Dist& next_mu, const Dist& next_nu) const override {
    return rps_reward(next_mu, next_nu);
  }
  double max_abs_reward() const override { return 1.0; }

  // Blue starts at Rock, Red at Paper.
  std::pair<JointTeamState, JointTeamState> initial_states(std::size_t n_blue, std::size_t n_red,
                                                           Rng&) const override {
    return {JointTeamState(std::vector<std::size_t>(n_blue, kRock), 3),
            JointTeamState(std::vector<std::size_t>(n_red, kPaper), 3)};
  }

 private:
  bool constrained_;
  EnvSpec spec_;
};

// ---------------------------------------------------------------------------
// Grid maps

enum GridAction : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr std::size_t kGridActions = 5;

struct GridMap {
  std::size_t n = 0;
  std::set<std::size_t> targets;
  std::set<std::size_t> obstacles;

  std::size_t cells() const { return n * n; }
  std::size_t row(std::size_t cell) const { return cell / n; }
  std::size_t col(std::size_t cell) const { return cell % n; }
  bool is_target(std::size_t cell) const { return targets.contains(cell); }
  bool is_obstacle(std::size_t cell) const { return obstacles.contains(cell); }

  // Neighbor in direction `action`, or nullopt when it leaves the grid.
  std::optional<std::size_t> neighbor(std::size_t cell, std::size_t action) const {
    const std::size_t r = row(cell), c = col(cell);
    switch (action) {
      case kUp:
        if (r == 0) return std::nullopt;
        return cell - n;
      case kDown:
        if (r + 1 >= n) return std::nullopt;
        return cell + n;
      case kLeft:
        if (c == 0) return std::nullopt;
        return cell - 1;
      case kRight:
        if (c + 1 >= n) return std::nullopt;
        return cell + 1;
      case kStay:
        return cell;
      default:
        throw Error("malformed action index " + std::to_string(action));
    }
  }

  // Manhattan distance to the nearest target cell.
  std::size_t target_distance(std::size_t cell) const {
    std::size_t best = 2 * n;
    for (std::size_t t : targets) {
      const auto dr = static_cast<long>(row(cell)) - static_cast<long>(row(t));
      const auto dc = static_cast<long>(col(cell)) - static_cast<long>(col(t));
      best = std::min(best, static_cast<std::size_t>(std::abs(dr) + std::abs(dc)));
    }
    return best;
  }
};

// One character per cell: '.' free, '#' obstacle, 'T' target. Blank lines and
// lines starting with ';' are ignored.
inline GridMap parse_map(const std::string& text) {
  GridMap map;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == ';') continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw Error("map is empty");
  map.n = rows.size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != map.n) throw Error("map must be square");
    for (std::size_t c = 0; c < map.n; ++c) {
      const std::size_t cell = r * map.n + c;
      switch (rows[r][c]) {
        case '.':
          break;
        case '#':
          map.obstacles.insert(cell);
          break;
        case 'T':
          map.targets.insert(cell);
          break;
        default:
          throw Error(std::string("unknown map character '") + rows[r][c] + "'");
      }
    }
  }
  if (map.targets.empty()) throw Error("map has no target");
  return map;
}

inline GridMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open map file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_map(buffer.str());
}

// Resolves `name` (with or without the .map suffix) inside `maps_dir`.
inline GridMap load_named_map(const std::string& name, const std::filesystem::path& maps_dir) {
  std::filesystem::path p = maps_dir / name;
  if (p.extension() != ".map") p += ".map";
  if (!std::filesystem::exists(p)) throw Error("map file not found: " + p.string());
  return load_map(p);
}

// ---------------------------------------------------------------------------
// Battlefield

struct BattlefieldParams {
  GridMap map;
  double alpha_x = 15.0;  // Red's power to deactivate Blue
  double alpha_y = 5.0;   // Blue's power to deactivate Red
  double beta_x = 0.0;    // Blue reactivation
  double beta_y = 0.0;    // Red reactivation
  double kappa = 100.0;

  void validate() const {
    for (std::size_t t : map.targets) {
      if (map.obstacles.contains(t)) throw Error("target cell is also an obstacle");
    }
    if (alpha_x < 0 || alpha_y < 0 || beta_x < 0 || beta_y < 0 || kappa < 0) {
      throw Error("battlefield powers must be non-negative");
    }
  }
};

// Flat index of (position, status): the active layer occupies [0, n^2), the
// inactive layer [n^2, 2 n^2).
struct GridState {
  std::size_t position = 0;
  int status = 1;

  static GridState decode(std::size_t index, std::size_t cells) {
    return index < cells ? GridState{index, 1} : GridState{index - cells, 0};
  }
  std::size_t encode(std::size_t cells) const { return status == 1 ? position : cells + position; }
};

inline double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

// Distribution over the next status {0: inactive, 1: active}; advantage is
// measured on the active layers of the (post-move) distributions.
inline Dist battlefield_status_transition(std::size_t pos, int status, const Dist& mu,
                                          const Dist& nu, const BattlefieldParams& params,
                                          Team team) {
  const double own = team == Team::Blue ? mu[pos] : nu[pos];
  const double opp = team == Team::Blue ? nu[pos] : mu[pos];
  if (status == 1) {
    const double alpha = team == Team::Blue ? params.alpha_x : params.alpha_y;
    const double deactivate = clip01(alpha * (opp - own));
    return Dist({deactivate, 1.0 - deactivate});
  }
  const double beta = team == Team::Blue ? params.beta_x : params.beta_y;
  const double reactivate = clip01(beta * (own - opp));
  return Dist({1.0 - reactivate, reactivate});
}

class BattlefieldEnv : public Environment {
 public:
  struct InitConfig {
    // Blue spawns at cells at least this far (Manhattan) from every target.
    std::size_t blue_min_distance = 3;
    // Red spawns within this distance of a target.
    std::size_t red_max_distance = 2;
    // Probability that a team spawns split evenly over two cells.
    double split_probability = 0.3;
  };

  BattlefieldEnv(BattlefieldParams params, int horizon, InitConfig init)
      : params_(std::move(params)), init_(init) {
    params_.validate();
    const std::size_t cells = params_.map.cells();
    spec_.name = "battlefield";
    spec_.blue_space_size = spec_.red_space_size = 2 * cells;
    spec_.blue_action_count = spec_.red_action_count = kGridActions;
    spec_.horizon = horizon;
    if (horizon < 1) throw Error("horizon must be >= 1");
    for (std::size_t c = 0; c < cells; ++c) {
      if (params_.map.is_obstacle(c) || params_.map.is_target(c)) continue;
      const std::size_t d = params_.map.target_distance(c);
      if (d >= init_.blue_min_distance) blue_spawn_.push_back(c);
      if (d <= init_.red_max_distance) red_spawn_.push_back(c);
    }
    if (blue_spawn_.empty() || red_spawn_.empty()) throw Error("map leaves no spawn cells");
  }

  BattlefieldEnv(BattlefieldParams params, int horizon)
      : BattlefieldEnv(std::move(params), horizon, InitConfig{}) {}

  const EnvSpec& spec() const override { return spec_; }
  const BattlefieldParams& params() const { return params_; }
  std::size_t cells() const { return params_.map.cells(); }

  // Deterministic move of an active agent; blocked moves become Stay.
  std::size_t move(Team team, std::size_t pos, std::size_t action) const {
    const auto next = params_.map.neighbor(pos, action);
    if (!next) return pos;
    if (params_.map.is_obstacle(*next)) return pos;
    if (team == Team::Red && params_.map.is_target(*next)) return pos;
    return *next;
  }

  bool absorbed(Team team, std::size_t state) const {
    const auto s = GridState::decode(state, cells());
    return team == Team::Blue && s.status == 1 && params_.map.is_target(s.position);
  }

  bool can_act(Team team, std::size_t state) const override {
    const auto s = GridState::decode(state, cells());
    return s.status == 1 && !absorbed(team, state);
  }

  // Active Blue mass on target cells.
  double target_mass(const Dist& mu) const {
    double m = 0.0;
    for (std::size_t t : params_.map.targets) m += mu[t];
    return m;
  }

  double reward(const Dist& mu, const Dist&, const Dist& next_mu, const Dist&) const override {
    return params_.kappa * (target_mass(next_mu) - target_mass(mu));
  }
  double max_abs_reward() const override { return params_.kappa; }

  bool terminal(const JointTeamState& blue, const JointTeamState&) const override {
    for (std::size_t s : blue.agent_states) {
      if (can_act(Team::Blue, s)) return false;
    }
    return true;
  }

  std::pair<JointTeamState, JointTeamState> initial_states(std::size_t n_blue, std::size_t n_red,
                                                           Rng& rng) const override {
    return {spawn(blue_spawn_, n_blue, rng), spawn(red_spawn_, n_red, rng)};
  }

  std::pair<Dist, Dist> propagate(const Dist& mu, const Dist& nu, const ActionTable& blue,
                                  const ActionTable& red) const override {
    const Dist moved_mu = move_mass(Team::Blue, mu, blue);
    const Dist moved_nu = move_mass(Team::Red, nu, red);
    return {status_mass(Team::Blue, moved_mu, moved_mu, moved_nu),
            status_mass(Team::Red, moved_nu, moved_mu, moved_nu)};
  }

  StepResult step(const JointTeamState& blue, const JointTeamState& red,
                  std::span<const std::size_t> blue_actions,
                  std::span<const std::size_t> red_actions, int t, Rng& rng) const override {
    check_actions(blue, red, blue_actions, red_actions);
    const Dist mu = empirical_distribution(blue);
    const Dist nu = empirical_distribution(red);
    JointTeamState moved_blue = move_agents(Team::Blue, blue, blue_actions);
    JointTeamState moved_red = move_agents(Team::Red, red, red_actions);
    const Dist moved_mu = empirical_distribution(moved_blue);
    const Dist moved_nu = empirical_distribution(moved_red);
    StepResult out;
    out.next_blue = resample_status(Team::Blue, moved_blue, moved_mu, moved_nu, rng);
    out.next_red = resample_status(Team::Red, moved_red, moved_mu, moved_nu, rng);
    const Dist next_mu = empirical_distribution(out.next_blue);
    const Dist next_nu = empirical_distribution(out.next_red);
    out.blue_reward = reward(mu, nu, next_mu, next_nu);
    out.done = t + 1 >= spec_.horizon || terminal(out.next_blue, out.next_red);
    return out;
  }

 private:
  JointTeamState spawn(const std::vector<std::size_t>& cells_allowed, std::size_t n,
                       Rng& rng) const {
    std::vector<std::size_t> states(n);
    const std::size_t first = cells_allowed[rng.below(cells_allowed.size())];
    std::size_t second = first;
    if (rng.uniform() < init_.split_probability && cells_allowed.size() > 1) {
      while (second == first) second = cells_allowed[rng.below(cells_allowed.size())];
    }
    for (std::size_t i = 0; i < n; ++i) states[i] = (i < n / 2 ? first : second);
    return JointTeamState(std::move(states), 2 * cells());
  }

  std::size_t move_state(Team team, std::size_t state, std::size_t action) const {
    if (!can_act(team, state)) return state;
    const auto s = GridState::decode(state, cells());
    return GridState{move(team, s.position, action), 1}.encode(cells());
  }

  JointTeamState move_agents(Team team, const JointTeamState& states,
                             std::span<const std::size_t> actions) const {
    std::vector<std::size_t> next(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      next[i] = move_state(team, states.agent_states[i], actions[i]);
    }
    return JointTeamState(std::move(next), states.space_size);
  }

  // One uniform is consumed per agent so paired runs stay aligned.
  JointTeamState resample_status(Team team, const JointTeamState& moved, const Dist& mu,
                                 const Dist& nu, Rng& rng) const {
    std::vector<std::size_t> next(moved.size());
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const std::size_t state = moved.agent_states[i];
      const double u = rng.uniform();
      if (absorbed(team, state)) {
        next[i] = state;
        continue;
      }
      const auto s = GridState::decode(state, cells());
      const Dist p = battlefield_status_transition(s.position, s.status, mu, nu, params_, team);
      const int status = u < p[0] ? 0 : 1;
      next[i] = GridState{s.position, status}.encode(cells());
    }
    return JointTeamState(std::move(next), moved.space_size);
  }

  Dist move_mass(Team team, const Dist& own, const ActionTable& table) const {
    std::vector<double> next(own.size(), 0.0);
    for (std::size_t x = 0; x < own.size(); ++x) {
      if (own[x] == 0.0) continue;
      if (!can_act(team, x)) {
        next[x] += own[x];
        continue;
      }
      for (std::size_t u = 0; u < kGridActions; ++u) {
        next[move_state(team, x, u)] += own[x] * table.at(x).at(u);
      }
    }
    return Dist(std::move(next));
  }

  Dist status_mass(Team team, const Dist& own, const Dist& mu, const Dist& nu) const {
    std::vector<double> next(own.size(), 0.0);
    for (std::size_t x = 0; x < own.size(); ++x) {
      if (own[x] == 0.0) continue;
      if (absorbed(team, x)) {
        next[x] += own[x];
        continue;
      }
      const auto s = GridState::decode(x, cells());
      const Dist p = battlefield_status_transition(s.position, s.status, mu, nu, params_, team);
      next[GridState{s.position, 0}.encode(cells())] += own[x] * p[0];
      next[GridState{s.position, 1}.encode(cells())] += own[x] * p[1];
    }
    return Dist(std::move(next));
  }

  BattlefieldParams params_;
  InitConfig init_;
  EnvSpec spec_;
  std::vector<std::size_t> blue_spawn_;
  std::vector<std::size_t> red_spawn_;
};

// ---------------------------------------------------------------------------
// Single-team navigation with congestion-driven obstacle penetration.

struct NavParams {
  double b = 10.0;
  double c = 0.05;
};

// Success probability of entering an obstacle cell from a cell holding mass m.
inline double penetration_probability(double m, const NavParams& p) {
  const double w = p.b * (m - p.c);
  return 1.0 / (1.0 + std::exp(-w));
}

inline std::vector<double> navigation_transition_dist(const GridMap& map, std::size_t pos,
                                                      std::size_t action, const Dist& mu,
                                                      const NavParams& params) {
  std::vector<double> row(map.cells(), 0.0);
  const auto next = map.neighbor(pos, action);
  if (!next) {
    row[pos] = 1.0;
  } else if (*next != pos && map.is_obstacle(*next)) {
    const double s = penetration_probability(mu[pos], params);
    row[*next] = s;
    row[pos] = 1.0 - s;
  } else {
    row[*next] = 1.0;
  }
  return row;
}

class NavigationEnv : public Environment {
 public:
  NavigationEnv(GridMap map, NavParams params, int horizon)
      : map_(std::move(map)), params_(params) {
    spec_.name = "navigation";
    spec_.blue_space_size = map_.cells();
    spec_.red_space_size = 1;
    spec_.blue_action_count = kGridActions;
    spec_.red_action_count = 1;
    spec_.horizon = horizon;
    if (horizon < 1) throw Error("horizon must be >= 1");
    for (std::size_t c = 0; c < map_.cells(); ++c) {
      max_distance_ = std::max(max_distance_, map_.target_distance(c));
      if (!map_.is_obstacle(c) && !map_.is_target(c)) spawn_.push_back(c);
    }
    if (max_distance_ == 0) max_distance_ = 1;
  }

  const EnvSpec& spec() const override { return spec_; }
  const GridMap& map() const { return map_; }
  const NavParams& params() const { return params_; }
  bool single_team() const override { return true; }

  std::vector<double> transition(Team team, std::size_t state, std::size_t action, const Dist& mu,
                                 const Dist&) const override {
    if (team == Team::Red) return {1.0};
    return navigation_transition_dist(map_, state, action, mu, params_);
  }

  // Negative mean Manhattan distance to the target region, scaled to [-1, 0].
  double reward(const Dist&, const Dist&, const Dist& next_mu, const Dist&) const override {
    double d = 0.0;
    for (std::size_t x = 0; x < next_mu.size(); ++x) {
      d += next_mu[x] * static_cast<double>(map_.target_distance(x));
    }
    return -d / static_cast<double>(max_distance_);
  }
  double max_abs_reward() const override { return 1.0; }

  // Agents drawn i.i.d. from a random (flat Dirichlet) distribution over
  // the free cells; the Red team is empty.
  std::pair<JointTeamState, JointTeamState> initial_states(std::size_t n_blue, std::size_t,
                                                           Rng& rng) const override {
    const auto weights = sample_flat_dirichlet(spawn_.size(), 1.0, rng);
    std::vector<std::size_t> states(n_blue);
    for (auto& s : states) s = spawn_[sample_categorical(weights, rng)];
    return {JointTeamState(std::move(states), map_.cells()), JointTeamState({}, 1)};
  }

  // Mean-field counterpart of initial_states for a given draw.
  Dist initial_mean_field(Rng& rng) const {
    const auto weights = sample_flat_dirichlet(spawn_.size(), 1.0, rng);
    std::vector<double> mu(map_.cells(), 0.0);
    for (std::size_t k = 0; k < spawn_.size(); ++k) mu[spawn_[k]] = weights[k];
    return Dist(std::move(mu));
  }

 private:
  GridMap map_;
  NavParams params_;
  EnvSpec spec_;
  std::size_t max_distance_ = 0;
  std::vector<std::size_t> spawn_;
};

// ---------------------------------------------------------------------------
// Registry

struct EnvConfig {
  std::string name = "crps";
  int horizon = 10;
  std::string map;  // battlefield / navigation map name
  std::filesystem::path maps_dir = "maps";
  BattlefieldParams battlefield;  // map field filled from `map`
  BattlefieldEnv::InitConfig battlefield_init;
  NavParams navigation;
};

inline std::unique_ptr<Environment> make_environment(const EnvConfig& cfg) {
  if (cfg.name == "crps") return std::make_unique<RpsEnv>(true, cfg.horizon);
  if (cfg.name == "rps") return std::make_unique<RpsEnv>(false, cfg.horizon);
  if (cfg.name == "battlefield") {
    BattlefieldParams p = cfg.battlefield;
    p.map = load_named_map(cfg.map.empty() ? "battlefield_4x4" : cfg.map, cfg.maps_dir);
    return std::make_unique<BattlefieldEnv>(std::move(p), cfg.horizon, cfg.battlefield_init);
  }
  if (cfg.name == "navigation") {
    return std::make_unique<NavigationEnv>(
        load_named_map(cfg.map.empty() ? "navigation_9x9" : cfg.map, cfg.maps_dir),
        cfg.navigation, cfg.horizon);
  }
  throw Error("unknown environment '" + cfg.name + "'");
}

// Unified dispatch; the Blue reward is shared by every Blue agent and its
// negation by every Red agent.
inline StepResult env_step(const Environment& env, const JointTeamState& blue,
                           const JointTeamState& red, std::span<const std::size_t> blue_actions,
                           std::span<const std::size_t> red_actions, int t, Rng& rng) {
  return env.step(blue, red, blue_actions, red_actions, t, rng);
}

}  // namespace mftg
