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

// MF-MAPPO: one shared actor and one critic per team, trained simultaneously
// with PPO on finite-population rollouts.
//
// Agents of a team that share (time step, state, action, advantage, target)
// produce identical loss terms, so the buffer stores one weighted sample per
// such group. The resulting losses equal the per-agent batch means exactly.

#include <cstdio>
#include <limits>
#include <memory>
#include <tuple>

#include "mftg/nn.hpp"
#include "mftg/oracle.hpp"

namespace mftg {

enum class CriticInputMode { MF_MAPPO, MAPPO_PS, MF_IPPO, MAPPO_CC };

inline const char* critic_mode_name(CriticInputMode m) {
  switch (m) {
    case CriticInputMode::MF_MAPPO:
      return "mf_mappo";
    case CriticInputMode::MAPPO_PS:
      return "mappo_ps";
    case CriticInputMode::MF_IPPO:
      return "mf_ippo";
    case CriticInputMode::MAPPO_CC:
      return "mappo_cc";
  }
  return "?";
}

inline CriticInputMode parse_critic_mode(const std::string& s) {
  if (s == "mf_mappo") return CriticInputMode::MF_MAPPO;
  if (s == "mappo_ps") return CriticInputMode::MAPPO_PS;
  if (s == "mf_ippo") return CriticInputMode::MF_IPPO;
  if (s == "mappo_cc") return CriticInputMode::MAPPO_CC;
  throw Error("unknown critic mode '" + s + "'");
}

inline constexpr std::size_t kMaxJointCriticAgents = 10;

struct TrainConfig {
  double actor_lr = 5e-4;
  double critic_lr = 1e-3;
  double lr_decay = 1.0;  // per update
  double clip = 0.1;
  int epochs = 10;
  int minibatches = 1;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_init = 0.01;
  double entropy_decay = 1.0;  // per update
  double grad_penalty = 0.0;
  double penalty_fd_step = 1e-4;
  bool normalize_advantages = true;
  // Time-limit ends are bootstrapped with the critic instead of treated as
  // terminal.
  bool bootstrap_at_horizon = false;
  int rollout_length = 100;
  long total_steps = 10000;
  std::size_t n_blue = 100;
  std::size_t n_red = 100;
  std::vector<std::size_t> actor_hidden{64};
  std::vector<std::size_t> critic_hidden{64};
  nn::Activation activation = nn::Activation::Tanh;
  double actor_output_gain = 0.01;
  CriticInputMode mode = CriticInputMode::MF_MAPPO;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw Error("ppo clip must be in (0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("gamma must be in (0,1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw Error("gae_lambda must be in [0,1]");
    if (!(actor_lr > 0.0 && critic_lr > 0.0 && lr_decay > 0.0 && entropy_decay > 0.0)) {
      throw Error("learning rates and decay factors must be > 0");
    }
    if (entropy_init < 0.0 || grad_penalty < 0.0) throw Error("weights must be >= 0");
    if (epochs < 1 || minibatches < 1 || rollout_length < 1 || total_steps < 1) {
      throw Error("epochs, minibatches, rollout_length and total_steps must be >= 1");
    }
    if (n_blue < 1) throw Error("Blue team must have at least one agent");
    if (!(penalty_fd_step > 0.0)) throw Error("penalty_fd_step must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Inputs

// [one-hot own state, mu, nu]
inline std::vector<double> actor_input(std::size_t state, std::size_t own_space, const Dist& mu,
                                       const Dist& nu) {
  std::vector<double> in(own_space + mu.size() + nu.size(), 0.0);
  in.at(state) = 1.0;
  std::copy(mu.probs().begin(), mu.probs().end(), in.begin() + static_cast<long>(own_space));
  std::copy(nu.probs().begin(), nu.probs().end(),
            in.begin() + static_cast<long>(own_space + mu.size()));
  return in;
}

inline std::size_t critic_input_dim(CriticInputMode mode, Team team, const EnvSpec& spec,
                                    std::size_t n_blue, std::size_t n_red) {
  const std::size_t own = team == Team::Blue ? spec.blue_space_size : spec.red_space_size;
  const std::size_t both = spec.blue_space_size + spec.red_space_size;
  switch (mode) {
    case CriticInputMode::MF_MAPPO:
      return both;
    case CriticInputMode::MAPPO_PS:
      return own + both;
    case CriticInputMode::MF_IPPO:
      return 2 * own;
    case CriticInputMode::MAPPO_CC:
      if (n_blue + n_red > kMaxJointCriticAgents) {
        throw Error("joint-state critic rejected above N=" + std::to_string(kMaxJointCriticAgents));
      }
      return n_blue * spec.blue_space_size + n_red * spec.red_space_size;
  }
  return 0;
}

// Critic input of an agent at `state`; `blue`/`red` are only read by the
// joint-state critic.
inline std::vector<double> critic_input(CriticInputMode mode, Team team, std::size_t state,
                                        const Dist& mu, const Dist& nu,
                                        const JointTeamState& blue, const JointTeamState& red) {
  const Dist& own = team == Team::Blue ? mu : nu;
  std::vector<double> in;
  auto append = [&in](std::span<const double> v) { in.insert(in.end(), v.begin(), v.end()); };
  auto one_hot = [&in](std::size_t i, std::size_t n) {
    const std::size_t base = in.size();
    in.resize(base + n, 0.0);
    in[base + i] = 1.0;
  };
  switch (mode) {
    case CriticInputMode::MF_MAPPO:
      append(mu.span());
      append(nu.span());
      break;
    case CriticInputMode::MAPPO_PS:
      one_hot(state, own.size());
      append(mu.span());
      append(nu.span());
      break;
    case CriticInputMode::MF_IPPO:
      one_hot(state, own.size());
      append(own.span());
      break;
    case CriticInputMode::MAPPO_CC:
      for (std::size_t s : blue.agent_states) one_hot(s, blue.space_size);
      for (std::size_t s : red.agent_states) one_hot(s, red.space_size);
      break;
  }
  return in;
}

// Whether the critic value differs between agents of a team at one step.
inline bool per_agent_critic(CriticInputMode mode) {
  return mode == CriticInputMode::MAPPO_PS || mode == CriticInputMode::MF_IPPO;
}

// Stochastic identical team policy backed by an actor network.
inline Policy actor_policy(std::shared_ptr<const nn::DenseNet> actor, std::size_t own_space) {
  return [actor = std::move(actor), own_space](std::size_t x, const Dist& mu, const Dist& nu, int) {
    return nn::softmax(actor->forward(actor_input(x, own_space, mu, nu)));
  };
}

// ---------------------------------------------------------------------------
// Advantages

struct AdvantageSet {
  std::vector<double> advantages;
  std::vector<double> returns;  // reward-to-go targets
  bool normalized = false;
};

// `values` carries one trailing bootstrap entry.
inline AdvantageSet compute_gae(std::span<const double> rewards, std::span<const double> values,
                                const std::vector<bool>& dones, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) throw Error("compute_gae: length mismatch");
  AdvantageSet out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next = delta + gamma * lambda * live * next;
    out.advantages[t] = next;
    out.returns[t] = next + values[t];
  }
  return out;
}

// GAE over segments: next_values[t] is the value of the successor state (0 for
// a terminal successor) and cut[t] stops the advantage recursion.
inline AdvantageSet compute_gae_segments(std::span<const double> rewards,
                                         std::span<const double> values,
                                         std::span<const double> next_values,
                                         const std::vector<bool>& cut, double gamma,
                                         double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || cut.size() != n) {
    throw Error("compute_gae: length mismatch");
  }
  AdvantageSet out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_values[t] - values[t];
    next = delta + (cut[t] ? 0.0 : gamma * lambda * next);
    out.advantages[t] = next;
    out.returns[t] = next + values[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Losses

struct ActorSample {
  std::size_t step = 0;
  std::vector<double> input;
  std::size_t action = 0;
  double weight = 1.0;
  double advantage = 0.0;
  double logp_old = 0.0;
};

struct CriticSample {
  std::size_t step = 0;
  std::vector<double> input;
  double target = 0.0;
  double weight = 1.0;
};

struct LossResult {
  double loss = 0.0;
  double surrogate = 0.0;
  double entropy = 0.0;
  double penalty = 0.0;
  double clip_fraction = 0.0;
  std::vector<double> grads;
};

// -(1/W) sum w [min(g A, clip(g) A) + omega H] + lambda (1/W) sum w |d log phi / d eta|^2,
// where eta is the mean-field part of the input (coordinates >= eta_offset).
// The penalty gradient uses a central difference of parameter gradients along
// the input-gradient direction.
inline LossResult actor_loss(const nn::DenseNet& net, std::span<const ActorSample* const> batch,
                             double clip, double omega, double lambda, std::size_t eta_offset,
                             double fd_step = 1e-4) {
  LossResult r;
  r.grads.assign(net.num_params(), 0.0);
  double total_w = 0.0;
  for (const auto* s : batch) total_w += s->weight;
  if (batch.empty() || total_w <= 0.0) return r;
  nn::Tape tape;
  std::vector<double> scratch(lambda > 0.0 ? net.num_params() : 0);
  std::vector<double> plus(scratch.size()), minus(scratch.size());
  for (const auto* s : batch) {
    const double w = s->weight / total_w;
    const auto z = net.forward(s->input, &tape);
    const auto lp = nn::log_softmax(z);
    std::vector<double> p(lp.size());
    double h = 0.0;
    for (std::size_t j = 0; j < lp.size(); ++j) {
      p[j] = std::exp(lp[j]);
      h -= p[j] * lp[j];
    }
    const double ratio = std::exp(lp[s->action] - s->logp_old);
    if (!std::isfinite(ratio)) throw Error("non-finite probability ratio");
    const double a = s->advantage;
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * a;
    const double surrogate = std::min(unclipped, clipped);
    const double dsurr = unclipped <= clipped ? ratio * a : 0.0;
    if (std::abs(ratio - 1.0) > clip) r.clip_fraction += w;
    r.surrogate += w * surrogate;
    r.entropy += w * h;
    r.loss -= w * (surrogate + omega * h);
    std::vector<double> dz(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double dlogp = (j == s->action ? 1.0 : 0.0) - p[j];
      const double dent = -p[j] * (lp[j] + h);
      dz[j] = -w * (dsurr * dlogp + omega * dent);
    }
    net.backward(tape, dz, r.grads);

    if (lambda <= 0.0) continue;
    std::vector<double> dlogp(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) dlogp[j] = (j == s->action ? 1.0 : 0.0) - p[j];
    std::fill(scratch.begin(), scratch.end(), 0.0);
    const auto gin = net.backward(tape, dlogp, scratch);
    double norm2 = 0.0;
    for (std::size_t k = eta_offset; k < gin.size(); ++k) norm2 += gin[k] * gin[k];
    r.penalty += w * norm2;
    r.loss += lambda * w * norm2;
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) continue;
    // d/dtheta |g|^2 = 2 |g| * d/de [grad_theta log phi(eta + e g/|g|)].
    auto param_grad_at = [&](double step, std::vector<double>& out) {
      std::vector<double> in = s->input;
      for (std::size_t k = eta_offset; k < in.size(); ++k) in[k] += step * gin[k] / norm;
      nn::Tape t2;
      const auto z2 = net.forward(in, &t2);
      const auto p2 = nn::softmax(z2);
      std::vector<double> d2(z2.size());
      for (std::size_t j = 0; j < z2.size(); ++j) d2[j] = (j == s->action ? 1.0 : 0.0) - p2[j];
      std::fill(out.begin(), out.end(), 0.0);
      net.backward(t2, d2, out);
    };
    param_grad_at(fd_step, plus);
    param_grad_at(-fd_step, minus);
    const double scale = lambda * w * 2.0 * norm / (2.0 * fd_step);
    for (std::size_t i = 0; i < r.grads.size(); ++i) r.grads[i] += scale * (plus[i] - minus[i]);
  }
  if (!std::isfinite(r.loss)) throw Error("non-finite actor loss");
  return r;
}

inline LossResult actor_loss(const nn::DenseNet& net, std::span<const ActorSample> batch,
                             double clip, double omega, double lambda, std::size_t eta_offset,
                             double fd_step = 1e-4) {
  std::vector<const ActorSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  return actor_loss(net, ptrs, clip, omega, lambda, eta_offset, fd_step);
}

// (1/W) sum w (V - target)^2
inline LossResult critic_loss(const nn::DenseNet& net, std::span<const CriticSample* const> batch) {
  LossResult r;
  r.grads.assign(net.num_params(), 0.0);
  double total_w = 0.0;
  for (const auto* s : batch) total_w += s->weight;
  if (batch.empty() || total_w <= 0.0) return r;
  nn::Tape tape;
  for (const auto* s : batch) {
    const double w = s->weight / total_w;
    const double v = net.forward(s->input, &tape)[0];
    const double e = v - s->target;
    r.loss += w * e * e;
    const double g = 2.0 * w * e;
    net.backward(tape, std::span<const double>(&g, 1), r.grads);
  }
  if (!std::isfinite(r.loss)) throw Error("non-finite critic loss");
  return r;
}

inline LossResult critic_loss(const nn::DenseNet& net, std::span<const CriticSample> batch) {
  std::vector<const CriticSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  return critic_loss(net, ptrs);
}

// ---------------------------------------------------------------------------
// Networks

struct TeamNets {
  nn::DenseNet actor;
  nn::DenseNet critic;
  nn::AdamState actor_opt;
  nn::AdamState critic_opt;
};

inline std::vector<nn::LayerSpec> stack(const std::vector<std::size_t>& hidden, nn::Activation act,
                                        std::size_t out) {
  std::vector<nn::LayerSpec> specs;
  for (std::size_t h : hidden) specs.push_back({h, act});
  specs.push_back({out, nn::Activation::Linear});
  return specs;
}

inline TeamNets make_team_nets(const Environment& env, Team team, const TrainConfig& cfg,
                               Rng& rng) {
  const auto& spec = env.spec();
  const std::size_t own = env.space_size(team);
  TeamNets nets;
  nets.actor = nn::DenseNet(own + spec.blue_space_size + spec.red_space_size,
                            stack(cfg.actor_hidden, cfg.activation, env.action_count(team)));
  nets.critic = nn::DenseNet(critic_input_dim(cfg.mode, team, spec, cfg.n_blue, cfg.n_red),
                             stack(cfg.critic_hidden, cfg.activation, 1));
  nn::init_network(nets.actor, rng, cfg.actor_output_gain);
  nn::init_network(nets.critic, rng, 1.0);
  nets.actor_opt = nn::AdamState(nets.actor.num_params(), cfg.actor_lr);
  nets.critic_opt = nn::AdamState(nets.critic.num_params(), cfg.critic_lr);
  return nets;
}

// ---------------------------------------------------------------------------
// Episodes and evaluation

struct EpisodeResult {
  double blue_return = 0.0;
  int length = 0;
  Dist final_mu;
  Dist final_nu;
  std::vector<Dist> mus;  // filled when recording
  std::vector<Dist> nus;
};

inline EpisodeResult run_episode(const Environment& env, const PolicyPair& pair,
                                 std::size_t n_blue, std::size_t n_red, Rng& rng,
                                 bool record = false) {
  auto [blue, red] = env.initial_states(n_blue, env.single_team() ? 0 : n_red, rng);
  EpisodeResult ep;
  for (int t = 0;; ++t) {
    const Dist mu = team_distribution(blue), nu = team_distribution(red);
    if (record) ep.mus.push_back(mu), ep.nus.push_back(nu);
    const auto bt = policy_table(env, Team::Blue, pair.blue, mu, mu, nu, t);
    const auto rt = policy_table(env, Team::Red, pair.red, nu, mu, nu, t);
    const auto ba = sample_team_actions(blue, bt, rng);
    const auto ra = sample_team_actions(red, rt, rng);
    auto step = env.step(blue, red, ba, ra, t, rng);
    ep.blue_return += step.blue_reward;
    ep.length = t + 1;
    blue = std::move(step.next_blue);
    red = std::move(step.next_red);
    if (step.done) break;
  }
  ep.final_mu = team_distribution(blue);
  ep.final_nu = team_distribution(red);
  if (record) ep.mus.push_back(ep.final_mu), ep.nus.push_back(ep.final_nu);
  return ep;
}

struct EvalResult {
  MeanStat stats;
  std::vector<double> returns;
  std::vector<Dist> final_mus;
  std::vector<Dist> final_nus;
  double mean_length = 0.0;
};

// Monte-Carlo estimate of the finite-population Blue return. Episode k uses
// a generator derived from (seed, k), so results do not depend on threading.
inline EvalResult evaluate_policy_pair(const Environment& env, const PolicyPair& pair,
                                       std::size_t episodes, std::size_t n_blue,
                                       std::size_t n_red, std::uint64_t seed) {
  if (episodes < 1) throw Error("episodes must be >= 1");
  std::vector<EpisodeResult> eps(episodes);
  parallel_for(episodes, [&](std::size_t k) {
    Rng rng(derive_seed(seed, "eval_episode", k));
    eps[k] = run_episode(env, pair, n_blue, n_red, rng);
  });
  EvalResult r;
  for (const auto& e : eps) {
    r.returns.push_back(e.blue_return);
    r.final_mus.push_back(e.final_mu);
    r.final_nus.push_back(e.final_nu);
    r.mean_length += static_cast<double>(e.length) / static_cast<double>(episodes);
  }
  r.stats = mean_stat(r.returns);
  return r;
}

// Median over random probes of sum_u |phi(u|x,mu,nu) - phi(u|x,mu',nu')| where
// (mu',nu') moves TV distance delta from (mu,nu) in each team field.
inline double policy_sensitivity(const nn::DenseNet& actor, std::size_t own_space,
                                 std::size_t blue_space, std::size_t red_space, double delta,
                                 std::size_t probes, std::uint64_t seed) {
  Rng rng(seed);
  auto perturb = [&](const Dist& d) {
    // Mix toward a random point: TV(d, (1-a) d + a q) = a TV(d, q).
    const Dist q(sample_flat_dirichlet(d.size(), 1.0, rng));
    const double tv = tv_distance(d, q);
    const double a = tv > 0.0 ? std::min(1.0, delta / tv) : 0.0;
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) out[i] = (1 - a) * d[i] + a * q[i];
    return Dist(std::move(out));
  };
  std::vector<double> diffs(probes);
  for (auto& diff : diffs) {
    const std::size_t x = rng.below(own_space);
    const Dist mu(sample_flat_dirichlet(blue_space, 1.0, rng));
    const Dist nu(sample_flat_dirichlet(red_space, 1.0, rng));
    const auto p = nn::softmax(actor.forward(actor_input(x, own_space, mu, nu)));
    const auto q = nn::softmax(actor.forward(actor_input(x, own_space, perturb(mu), perturb(nu))));
    diff = 0.0;
    for (std::size_t u = 0; u < p.size(); ++u) diff += std::abs(p[u] - q[u]);
  }
  std::nth_element(diffs.begin(), diffs.begin() + static_cast<long>(probes / 2), diffs.end());
  return diffs[probes / 2];
}

// ---------------------------------------------------------------------------
// Training

struct MetricsRow {
  int update_idx = 0;
  long env_steps = 0;
  Team team = Team::Blue;
  double mean_ep_reward = 0.0;  // NaN when no episode finished in this rollout
  double mean_ep_len = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double lr = 0.0;
  double omega = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "update_idx,env_steps,team,mean_ep_reward,mean_ep_len,actor_loss,critic_loss,entropy,lr,omega";

inline std::string metrics_csv_line(const MetricsRow& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%ld,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                m.update_idx, m.env_steps, team_name(m.team), m.mean_ep_reward, m.mean_ep_len,
                m.actor_loss, m.critic_loss, m.entropy, m.lr, m.omega);
  return buf;
}

struct BufferCheck {
  std::size_t buffers = 0;     // team buffers checked
  std::size_t violations = 0;  // time steps with differing targets among agents
};

struct TrainResult {
  TeamNets blue;
  TeamNets red;
  std::vector<MetricsRow> metrics;
  long env_steps = 0;
  int updates = 0;
  BufferCheck reward_to_go_check;
};

// Raised when an update produces non-finite values; carries the networks as
// they stood when training stopped.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, TrainResult partial)
      : Error(what), partial_(std::make_shared<TrainResult>(std::move(partial))) {}
  const TrainResult& partial() const { return *partial_; }

 private:
  std::shared_ptr<TrainResult> partial_;
};

namespace detail {

struct StepRecord {
  int t = 0;
  JointTeamState blue, red;
  std::vector<std::size_t> blue_actions, red_actions;
  Dist mu, nu;
  ActionTable blue_logp, red_logp;
  double reward = 0.0;
  bool done = false;       // episode ended after this step
  bool terminal = false;   // successor has value zero
  // Successor state, kept when the successor is not the next record.
  std::optional<JointTeamState> succ_blue, succ_red;
};

inline ActionTable log_table(const ActionTable& probs) {
  ActionTable out = probs;
  for (auto& row : out) {
    for (double& p : row) p = p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

inline ActionTable actor_table(const Environment& env, Team team, const nn::DenseNet& actor,
                               const Dist& own, const Dist& mu, const Dist& nu) {
  const std::size_t space = env.space_size(team);
  std::vector<double> idle(env.action_count(team), 0.0);
  idle.back() = 1.0;
  ActionTable table(space, idle);
  for (std::size_t x = 0; x < space; ++x) {
    if (own[x] == 0.0 || !env.can_act(team, x)) continue;
    table[x] = nn::softmax(actor.forward(actor_input(x, space, mu, nu)));
  }
  return table;
}

struct TeamBatch {
  std::vector<ActorSample> actor;
  std::vector<CriticSample> critic;
};

// Per-agent critic values of every agent of `team` in a state.
inline std::vector<double> agent_values(const nn::DenseNet& critic, CriticInputMode mode, Team team,
                                        const JointTeamState& blue, const JointTeamState& red) {
  const Dist mu = team_distribution(blue), nu = team_distribution(red);
  const JointTeamState& own = team == Team::Blue ? blue : red;
  std::vector<double> out(own.size());
  if (!per_agent_critic(mode)) {
    const double v = critic.forward(critic_input(mode, team, 0, mu, nu, blue, red))[0];
    std::fill(out.begin(), out.end(), v);
    return out;
  }
  std::map<std::size_t, double> cache;
  for (std::size_t i = 0; i < own.size(); ++i) {
    const std::size_t x = own.agent_states[i];
    auto it = cache.find(x);
    if (it == cache.end()) {
      it = cache.emplace(x, critic.forward(critic_input(mode, team, x, mu, nu, blue, red))[0]).first;
    }
    out[i] = it->second;
  }
  return out;
}

// Builds grouped actor/critic samples for one team from a rollout.
inline TeamBatch build_team_batch(const Environment& env, const std::vector<StepRecord>& steps,
                                  Team team, const TeamNets& nets, const TrainConfig& cfg,
                                  BufferCheck& check) {
  const std::size_t n_steps = steps.size();
  const double sign = team == Team::Blue ? 1.0 : -1.0;
  auto own_of = [team](const StepRecord& s) -> const JointTeamState& {
    return team == Team::Blue ? s.blue : s.red;
  };
  const std::size_t n_agents = own_of(steps.front()).size();
  TeamBatch batch;
  if (n_agents == 0) return batch;

  // values[t][i] and next_values[t][i]
  std::vector<std::vector<double>> values(n_steps), next_values(n_steps);
  for (std::size_t t = 0; t < n_steps; ++t) {
    values[t] = agent_values(nets.critic, cfg.mode, team, steps[t].blue, steps[t].red);
  }
  for (std::size_t t = 0; t < n_steps; ++t) {
    const auto& s = steps[t];
    if (s.terminal) {
      next_values[t].assign(n_agents, 0.0);
    } else if (s.succ_blue) {
      next_values[t] = agent_values(nets.critic, cfg.mode, team, *s.succ_blue, *s.succ_red);
    } else {
      next_values[t] = values[t + 1];
    }
  }

  // Per-agent GAE; agent identities persist within an episode.
  std::vector<std::vector<double>> adv(n_steps, std::vector<double>(n_agents));
  std::vector<std::vector<double>> ret(n_steps, std::vector<double>(n_agents));
  std::vector<double> r(n_steps), v(n_steps), nv(n_steps);
  std::vector<bool> cut(n_steps);
  for (std::size_t t = 0; t < n_steps; ++t) {
    r[t] = sign * steps[t].reward;
    cut[t] = steps[t].done || t + 1 == n_steps;
  }
  for (std::size_t i = 0; i < n_agents; ++i) {
    for (std::size_t t = 0; t < n_steps; ++t) v[t] = values[t][i], nv[t] = next_values[t][i];
    const auto a = compute_gae_segments(r, v, nv, cut, cfg.gamma, cfg.gae_lambda);
    for (std::size_t t = 0; t < n_steps; ++t) adv[t][i] = a.advantages[t], ret[t][i] = a.returns[t];
  }

  // Identical per-team targets whenever the critic sees only team-level inputs.
  if (!per_agent_critic(cfg.mode)) {
    ++check.buffers;
    for (std::size_t t = 0; t < n_steps; ++t) {
      for (std::size_t i = 1; i < n_agents; ++i) {
        if (ret[t][i] != ret[t][0]) {
          ++check.violations;
          break;
        }
      }
    }
  }

  const std::size_t space = env.space_size(team);
  for (std::size_t t = 0; t < n_steps; ++t) {
    const auto& s = steps[t];
    const auto& own = own_of(s);
    const auto& actions = team == Team::Blue ? s.blue_actions : s.red_actions;
    const auto& logp = team == Team::Blue ? s.blue_logp : s.red_logp;
    // (state, action, advantage, target) -> count
    std::map<std::tuple<std::size_t, std::size_t, double, double>, std::size_t> groups;
    std::map<std::tuple<std::size_t, double>, std::size_t> critic_groups;
    for (std::size_t i = 0; i < n_agents; ++i) {
      const std::size_t x = own.agent_states[i];
      const std::size_t ckey = per_agent_critic(cfg.mode) ? x : 0;
      ++critic_groups[{ckey, ret[t][i]}];
      if (!env.can_act(team, x)) continue;
      ++groups[{x, actions[i], adv[t][i], ret[t][i]}];
    }
    for (const auto& [key, count] : groups) {
      const auto& [x, u, a, target] = key;
      ActorSample as;
      as.step = t;
      as.input = actor_input(x, space, s.mu, s.nu);
      as.action = u;
      as.weight = static_cast<double>(count);
      as.advantage = a;
      as.logp_old = logp[x][u];
      batch.actor.push_back(std::move(as));
    }
    for (const auto& [key, count] : critic_groups) {
      const auto& [x, target] = key;
      CriticSample cs;
      cs.step = t;
      cs.input = critic_input(cfg.mode, team, x, s.mu, s.nu, s.blue, s.red);
      cs.target = target;
      cs.weight = static_cast<double>(count);
      batch.critic.push_back(std::move(cs));
    }
  }

  if (cfg.normalize_advantages && !batch.actor.empty()) {
    double w = 0.0, m = 0.0, var = 0.0;
    for (const auto& s : batch.actor) w += s.weight, m += s.weight * s.advantage;
    m /= w;
    for (const auto& s : batch.actor) var += s.weight * (s.advantage - m) * (s.advantage - m);
    const double sd = std::sqrt(var / w);
    for (auto& s : batch.actor) s.advantage = (s.advantage - m) / (sd + 1e-8);
  }
  return batch;
}

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
};

inline UpdateStats update_team(TeamNets& nets, const TeamBatch& batch, std::size_t n_steps,
                               std::size_t eta_offset, double omega, const TrainConfig& cfg,
                               Rng& rng) {
  UpdateStats stats;
  if (batch.actor.empty() && batch.critic.empty()) return stats;
  std::vector<std::size_t> order(n_steps);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mbs = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatches), n_steps);
  int passes = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> bucket(n_steps);
    if (mbs > 1) {
      for (std::size_t i = n_steps; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      for (std::size_t k = 0; k < n_steps; ++k) bucket[order[k]] = k * mbs / n_steps;
    }
    for (std::size_t mb = 0; mb < mbs; ++mb) {
      std::vector<const ActorSample*> actor;
      std::vector<const CriticSample*> critic;
      for (const auto& s : batch.actor) {
        if (bucket[s.step] == mb) actor.push_back(&s);
      }
      for (const auto& s : batch.critic) {
        if (bucket[s.step] == mb) critic.push_back(&s);
      }
      if (!actor.empty()) {
        const auto a = actor_loss(nets.actor, actor, cfg.clip, omega, cfg.grad_penalty,
                                  eta_offset, cfg.penalty_fd_step);
        nn::adam_step(nets.actor.params(), a.grads, nets.actor_opt);
        stats.actor_loss += a.loss;
        stats.entropy += a.entropy;
      }
      if (!critic.empty()) {
        const auto c = critic_loss(nets.critic, critic);
        nn::adam_step(nets.critic.params(), c.grads, nets.critic_opt);
        stats.critic_loss += c.loss;
      }
      ++passes;
    }
  }
  stats.actor_loss /= passes;
  stats.critic_loss /= passes;
  stats.entropy /= passes;
  return stats;
}

}  // namespace detail

using MetricsCallback = std::function<void(const MetricsRow&)>;

// Simultaneous two-team MF-MAPPO. Deterministic given cfg.seed.
inline TrainResult train(const Environment& env, const TrainConfig& cfg,
                         const MetricsCallback& on_metrics = {}) {
  cfg.validate();
  const bool has_red = !env.single_team();
  const std::size_t n_red = has_red ? cfg.n_red : 0;
  if (has_red && n_red < 1) throw Error("Red team must have at least one agent");
  TrainConfig local = cfg;
  local.n_red = n_red;
  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng rollout_rng(derive_seed(cfg.seed, "rollout"));
  Rng update_rng(derive_seed(cfg.seed, "minibatch"));
  TrainResult out;
  out.blue = make_team_nets(env, Team::Blue, local, init_rng);
  out.red = make_team_nets(env, Team::Red, local, init_rng);

  auto [blue, red] = env.initial_states(cfg.n_blue, n_red, rollout_rng);
  int t = 0;
  double ep_return = 0.0;
  while (out.env_steps < cfg.total_steps) {
    const long len = std::min<long>(cfg.rollout_length, cfg.total_steps - out.env_steps);
    std::vector<detail::StepRecord> records;
    records.reserve(static_cast<std::size_t>(len));
    std::vector<double> returns, lengths;
    for (long k = 0; k < len; ++k) {
      detail::StepRecord rec;
      rec.t = t;
      rec.mu = team_distribution(blue);
      rec.nu = team_distribution(red);
      const auto bt = detail::actor_table(env, Team::Blue, out.blue.actor, rec.mu, rec.mu, rec.nu);
      const auto rt = detail::actor_table(env, Team::Red, out.red.actor, rec.nu, rec.mu, rec.nu);
      rec.blue_actions = sample_team_actions(blue, bt, rollout_rng);
      rec.red_actions = sample_team_actions(red, rt, rollout_rng);
      rec.blue_logp = detail::log_table(bt);
      rec.red_logp = detail::log_table(rt);
      auto step = env.step(blue, red, rec.blue_actions, rec.red_actions, t, rollout_rng);
      rec.blue = std::move(blue);
      rec.red = std::move(red);
      rec.reward = step.blue_reward;
      ep_return += step.blue_reward;
      ++out.env_steps;
      if (step.done) {
        rec.done = true;
        const bool time_limit = !env.terminal(step.next_blue, step.next_red);
        rec.terminal = !(cfg.bootstrap_at_horizon && time_limit);
        if (!rec.terminal) {
          rec.succ_blue = step.next_blue;
          rec.succ_red = step.next_red;
        }
        returns.push_back(ep_return);
        lengths.push_back(t + 1);
        ep_return = 0.0;
        t = 0;
        std::tie(blue, red) = env.initial_states(cfg.n_blue, n_red, rollout_rng);
      } else {
        blue = std::move(step.next_blue);
        red = std::move(step.next_red);
        ++t;
        if (k + 1 == len) {
          rec.succ_blue = blue;
          rec.succ_red = red;
        }
      }
      records.push_back(std::move(rec));
    }

    const int u = out.updates;
    const double omega = cfg.entropy_init * std::pow(cfg.entropy_decay, u);
    const double decay = std::pow(cfg.lr_decay, u);
    double mean_return = std::numeric_limits<double>::quiet_NaN();
    double mean_len = std::numeric_limits<double>::quiet_NaN();
    if (!returns.empty()) {
      mean_return = mean_stat(returns).mean;
      mean_len = mean_stat(lengths).mean;
    }
    for (Team team : {Team::Blue, Team::Red}) {
      TeamNets& nets = team == Team::Blue ? out.blue : out.red;
      nets.actor_opt.lr = cfg.actor_lr * decay;
      nets.critic_opt.lr = cfg.critic_lr * decay;
    }
    // Both batches are built from the frozen pre-update networks.
    auto blue_batch = detail::build_team_batch(env, records, Team::Blue, out.blue, local,
                                               out.reward_to_go_check);
    auto red_batch = detail::build_team_batch(env, records, Team::Red, out.red, local,
                                              out.reward_to_go_check);
    for (Team team : {Team::Blue, Team::Red}) {
      if (team == Team::Red && !has_red) continue;
      TeamNets& nets = team == Team::Blue ? out.blue : out.red;
      detail::UpdateStats st;
      try {
        st = detail::update_team(nets, team == Team::Blue ? blue_batch : red_batch,
                                 records.size(), env.space_size(team), omega, cfg, update_rng);
      } catch (const Error& e) {
        throw TrainingAborted("training aborted at update " + std::to_string(u) + " (" +
                                  team_name(team) + "): " + e.what(),
                              out);
      }
      MetricsRow row;
      row.update_idx = u;
      row.env_steps = out.env_steps;
      row.team = team;
      row.mean_ep_reward = team == Team::Blue ? mean_return : -mean_return;
      row.mean_ep_len = mean_len;
      row.actor_loss = st.actor_loss;
      row.critic_loss = st.critic_loss;
      row.entropy = st.entropy;
      row.lr = nets.actor_opt.lr;
      row.omega = omega;
      out.metrics.push_back(row);
      if (on_metrics) on_metrics(row);
    }
    ++out.updates;
  }
  return out;
}

}  // namespace mftg
