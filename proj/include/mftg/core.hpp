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

// Finite-distribution arithmetic shared by every other module: probability
// vectors, empirical distributions of finite teams, total variation, and the
// Euclidean projection onto simplices with pinned coordinates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mftg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDistTolerance = 1e-9;

// ---------------------------------------------------------------------------
// Seeding and random numbers.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Labeled counter derivation of a component seed from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Seeded generator. Uniform and normal draws are computed from raw 64-bit
// words so the streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Dist

// Probability vector over a flat, integer-indexed finite space.
class Dist {
 public:
  Dist() = default;

  // Validates and, when the total drifts by more than kDistTolerance but less
  // than 1e-6, renormalizes. Tiny negatives from rounding are clamped.
  explicit Dist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw Error("distribution over an empty space");
    double total = 0.0;
    for (double& p : probs_) {
      if (!std::isfinite(p)) throw Error("distribution entry is not finite");
      if (p < 0.0) {
        if (p < -1e-12) throw Error("negative probability " + std::to_string(p));
        p = 0.0;
      }
      total += p;
    }
    const double drift = std::abs(total - 1.0);
    if (drift > 1e-6) {
      throw Error("probabilities sum to " + std::to_string(total));
    }
    if (drift > kDistTolerance) {
      for (double& p : probs_) p /= total;
    }
    for (double& p : probs_) p = std::min(p, 1.0);
  }

  static Dist uniform(std::size_t n) {
    return Dist(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }
  static Dist one_hot(std::size_t n, std::size_t i) {
    std::vector<double> p(n, 0.0);
    p.at(i) = 1.0;
    return Dist(std::move(p));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }
  std::span<const double> span() const { return probs_; }

  bool operator==(const Dist&) const = default;

 private:
  std::vector<double> probs_;
};

// ---------------------------------------------------------------------------
// JointTeamState

struct JointTeamState {
  std::vector<std::size_t> agent_states;
  std::size_t space_size = 1;

  JointTeamState() = default;
  JointTeamState(std::vector<std::size_t> states, std::size_t space)
      : agent_states(std::move(states)), space_size(space) {
    if (space_size == 0) throw Error("state space must be non-empty");
    for (std::size_t s : agent_states) {
      if (s >= space_size) throw Error("agent state out of range");
    }
  }

  std::size_t size() const { return agent_states.size(); }
  bool empty() const { return agent_states.empty(); }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c(space_size, 0);
    for (std::size_t s : agent_states) ++c[s];
    return c;
  }
};

inline Dist empirical_distribution(const JointTeamState& team) {
  if (team.empty()) throw Error("empty population");
  const auto counts = team.counts();
  const double n = static_cast<double>(team.size());
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / n;
  return Dist(std::move(p));
}

// Team whose agents exactly discretize `mu`; requires N*mu(x) to be integral.
inline JointTeamState discretize(const Dist& mu, std::size_t n) {
  std::vector<std::size_t> states;
  states.reserve(n);
  for (std::size_t x = 0; x < mu.size(); ++x) {
    const double exact = mu[x] * static_cast<double>(n);
    const auto k = static_cast<std::size_t>(std::llround(exact));
    if (std::abs(exact - static_cast<double>(k)) > 1e-6) {
      throw Error("distribution is not a multiple of 1/N");
    }
    states.insert(states.end(), k, x);
  }
  if (states.size() != n) throw Error("discretization does not preserve population size");
  return JointTeamState(std::move(states), mu.size());
}

// ---------------------------------------------------------------------------
// Distances

inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("tv_distance: mismatched sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

inline double tv_distance(const Dist& p, const Dist& q) { return tv_distance(p.span(), q.span()); }

// ---------------------------------------------------------------------------
// Projection

// Feasible region R(x): coordinates pinned to observed values, remaining
// coordinates free on a simplex of total mass free_mass.
class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::map<std::size_t, double> pinned) : pinned_(std::move(pinned)) {
    double total = 0.0;
    for (const auto& [idx, value] : pinned_) {
      if (!(value >= 0.0) || !std::isfinite(value)) throw Error("pinned value must be >= 0");
      total += value;
    }
    if (total > 1.0 + kDistTolerance) throw Error("infeasible constraint set");
    free_mass_ = std::max(0.0, 1.0 - total);
  }

  const std::map<std::size_t, double>& pinned() const { return pinned_; }
  double free_mass() const { return free_mass_; }
  bool is_pinned(std::size_t i) const { return pinned_.contains(i); }

  bool contains(std::span<const double> v, double tol = 1e-9) const {
    double free_total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto it = pinned_.find(i);
      if (it != pinned_.end()) {
        if (v[i] != it->second) return false;
      } else {
        if (v[i] < -tol) return false;
        free_total += v[i];
      }
    }
    return std::abs(free_total - free_mass_) <= tol;
  }

 private:
  std::map<std::size_t, double> pinned_;
  double free_mass_ = 1.0;
};

// Euclidean projection of v onto {w >= 0, sum w = mass} by sort-and-threshold.
inline std::vector<double> project_simplex(std::span<const double> v, double mass) {
  const std::size_t n = v.size();
  std::vector<double> out(n, 0.0);
  if (n == 0 || mass <= 0.0) return out;
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double running = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    running += sorted[j];
    const double candidate = (running - mass) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

// argmin over w in R(x) of ||v - w||_2. Points already feasible to 1e-12 are
// returned unchanged, which makes the operator exactly idempotent.
inline std::vector<double> project_constrained(std::span<const double> v, const ConstraintSet& c) {
  const std::size_t n = v.size();
  for (const auto& [idx, value] : c.pinned()) {
    if (idx >= n) throw Error("pinned coordinate outside the space");
  }
  std::vector<std::size_t> free_idx;
  free_idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.is_pinned(i)) free_idx.push_back(i);
  }
  std::vector<double> out(v.begin(), v.end());
  for (const auto& [idx, value] : c.pinned()) out[idx] = value;

  bool feasible = true;
  double free_total = 0.0;
  for (std::size_t i : free_idx) {
    if (!std::isfinite(v[i])) throw Error("projection input is not finite");
    if (v[i] < 0.0) feasible = false;
    free_total += v[i];
  }
  if (feasible && std::abs(free_total - c.free_mass()) <= 1e-12) return out;

  std::vector<double> free_values(free_idx.size());
  for (std::size_t k = 0; k < free_idx.size(); ++k) free_values[k] = v[free_idx[k]];
  const auto projected = project_simplex(free_values, c.free_mass());
  for (std::size_t k = 0; k < free_idx.size(); ++k) out[free_idx[k]] = projected[k];
  return out;
}

inline Dist project_constrained_simplex(std::span<const double> v, const ConstraintSet& c) {
  return Dist(project_constrained(v, c));
}

// ---------------------------------------------------------------------------
// Sampling

inline std::size_t sample_categorical(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = i;
    cumulative += p[i];
    if (u < cumulative) return i;
  }
  return last_positive;
}

inline std::size_t sample_categorical(const Dist& p, Rng& rng) { return sample_categorical(p.span(), rng); }

// Flat Dirichlet(1,...,1) sample scaled to `mass`.
inline std::vector<double> sample_flat_dirichlet(std::size_t n, double mass, Rng& rng) {
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  double total = 0.0;
  for (double& e : out) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    e = -std::log(u);
    total += e;
  }
  for (double& e : out) e = mass * e / total;
  return out;
}

// ---------------------------------------------------------------------------
// Small statistics helpers

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("fit_line needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("fit_line: x values are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

struct MeanStat {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double std_error = 0.0;
  std::size_t count = 0;
};

inline MeanStat mean_stat(std::span<const double> v) {
  MeanStat s;
  s.count = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double e : v) ss += (e - s.mean) * (e - s.mean);
    s.variance = ss / static_cast<double>(v.size() - 1);
    s.std_error = std::sqrt(s.variance / static_cast<double>(v.size()));
  }
  return s;
}

}  // namespace mftg
