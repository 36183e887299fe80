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

#include "mftg/oracle.hpp"

#include <gtest/gtest.h>

namespace mftg {
namespace {

const Dist kThird({1.0 / 3, 1.0 / 3, 1.0 / 3});

void expect_dist_near(const Dist& a, const Dist& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "entry " << i;
}

TEST(PropagateTest, IdentityKernel) {
  const Dist mu({0.2, 0.5, 0.3});
  const ActionTable table(3, {0.4, 0.6});
  const Kernel id = [](std::size_t x, std::size_t) {
    std::vector<double> r(3, 0.0);
    r[x] = 1.0;
    return r;
  };
  EXPECT_EQ(propagate_mean_field(mu, table, id), mu);
}

TEST(PropagateTest, CrpsShifts) {
  RpsEnv env(true, 1);
  const Dist mu({1, 0, 0}), nu({0, 1, 0});
  const PolicyPair cw{constant_policy({1.0, 0.0}), constant_policy({1.0, 0.0})};
  EXPECT_EQ(propagate_mean_field(env, mu, nu, cw, 0).first, Dist({0, 1, 0}));
  const PolicyPair half{uniform_policy(2), uniform_policy(2)};
  EXPECT_EQ(propagate_mean_field(env, mu, nu, half, 0).first, Dist({0.5, 0.5, 0}));
}

TEST(PropagateTest, RejectsBadKernel) {
  const Dist mu({0.5, 0.5});
  const ActionTable table(2, {1.0});
  const Kernel bad = [](std::size_t, std::size_t) { return std::vector<double>{0.5, 0.4}; };
  try {
    propagate_mean_field(mu, table, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "kernel row does not sum to 1");
  }
}

TEST(PropagateTest, ConservesMassAndIsLinear) {
  RpsEnv env(false, 1);
  Rng rng(3);
  const ActionTable table{{0.2, 0.3, 0.5}, {0.6, 0.1, 0.3}, {0.0, 0.5, 0.5}};
  const Kernel k = [&](std::size_t x, std::size_t u) {
    return env.transition(Team::Blue, x, u, kThird, kThird);
  };
  for (int trial = 0; trial < 100; ++trial) {
    const Dist a(sample_flat_dirichlet(3, 1.0, rng)), b(sample_flat_dirichlet(3, 1.0, rng));
    const double w = rng.uniform();
    std::vector<double> mix(3);
    for (int i = 0; i < 3; ++i) mix[i] = w * a[i] + (1 - w) * b[i];
    const auto pa = propagate_mean_field(a, table, k), pb = propagate_mean_field(b, table, k);
    const auto pm = propagate_mean_field(Dist(mix), table, k);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
      total += pm[i];
      EXPECT_NEAR(pm[i], w * pa[i] + (1 - w) * pb[i], 1e-12);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(AnalyticalTest, CrpsValueAndTrajectory) {
  RpsEnv env(true, 10);
  const auto pair = crps_analytical_policy_pair();
  const auto traj = rollout_infinite(env, crps_initial_blue(), crps_initial_red(), pair, 10);
  ASSERT_EQ(traj.mus.size(), 11u);
  expect_dist_near(traj.mus[1], Dist({0.5, 0.5, 0}), 1e-12);
  expect_dist_near(traj.nus[1], Dist({0, 2.0 / 3, 1.0 / 3}), 1e-12);
  for (std::size_t t = 2; t <= 10; ++t) {
    expect_dist_near(traj.mus[t], kThird, 1e-9);
    expect_dist_near(traj.nus[t], kThird, 1e-9);
  }
  EXPECT_NEAR(traj.cumulative_value, -1.0 / 3.0, 1e-9);
}

TEST(AnalyticalTest, RejectsOtherInitialization) {
  try {
    crps_analytical_policy_pair(Dist({0, 1, 0}), crps_initial_red());
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "analytical solution defined only for the paper's initialization");
  }
}

TEST(AnalyticalTest, NoBlueDeviationImprovesOnRed) {
  // Against Red's analytical policy, Blue's best deterministic time-varying
  // response over a 3-step horizon cannot beat -1/3 by more than rounding.
  RpsEnv env(true, 3);
  const auto pair = crps_analytical_policy_pair();
  double best = -1e9;
  for (int mask = 0; mask < 64; ++mask) {
    PolicyPair dev = pair;
    dev.blue = [mask](std::size_t x, const Dist&, const Dist&, int t) {
      const int bit = (mask >> (t * 2 + (x == kRock ? 0 : 1))) & 1;
      return t < 3 && x != kScissors ? std::vector<double>{double(bit), 1.0 - bit}
                                     : std::vector<double>{0.0, 1.0};
    };
    best = std::max(best, rollout_infinite(env, crps_initial_blue(), crps_initial_red(), dev, 3)
                              .cumulative_value);
  }
  EXPECT_LE(best, -1.0 / 3.0 + 1e-9);
}

TEST(RolloutTest, DeterministicAndZeroReward) {
  RpsEnv env(true, 4);
  const PolicyPair u{uniform_policy(2), uniform_policy(2)};
  const auto a = rollout_infinite(env, kThird, kThird, u, 4);
  const auto b = rollout_infinite(env, kThird, kThird, u, 4);
  EXPECT_EQ(a.cumulative_value, b.cumulative_value);
  for (std::size_t t = 0; t < a.mus.size(); ++t) EXPECT_EQ(a.mus[t], b.mus[t]);
  EXPECT_NEAR(a.cumulative_value, 0.0, 1e-12);  // uniform vs uniform earns nothing
}

TEST(FiniteVsOracleTest, ExactDiscretizationWithDeterministicPolicy) {
  RpsEnv env(false, 1);
  const Dist mu({0.25, 0.5, 0.25}), nu({0.5, 0.0, 0.5});
  const PolicyPair p{constant_policy({0.0, 1.0, 0.0}), constant_policy({1.0, 0.0, 0.0})};
  const auto [m1, n1] = propagate_mean_field(env, mu, nu, p, 0);
  for (std::size_t n : {4u, 40u, 400u}) {
    const auto blue = discretize(mu, n), red = discretize(nu, n);
    Rng rng(n);
    const auto bt = policy_table(env, Team::Blue, p.blue, mu, mu, nu, 0);
    const auto rt = policy_table(env, Team::Red, p.red, nu, mu, nu, 0);
    const auto r = env.step(blue, red, sample_team_actions(blue, bt, rng),
                            sample_team_actions(red, rt, rng), 0, rng);
    EXPECT_EQ(empirical_distribution(r.next_blue), m1);
    EXPECT_EQ(empirical_distribution(r.next_red), n1);
  }
}

TEST(GapTest, DeterministicPolicyHasNoGap) {
  RpsEnv env(true, 1);
  const PolicyPair p{constant_policy({1.0, 0.0}), constant_policy({0.0, 1.0})};
  for (const auto& row : mf_approx_gap(env, p, {10, 100}, 100, 1)) EXPECT_EQ(row.mean_gap, 0.0);
}

TEST(GapTest, ShrinksLikeInverseSqrtN) {
  RpsEnv env(true, 1);
  const PolicyPair p{uniform_policy(2), uniform_policy(2)};
  const auto rows = mf_approx_gap(env, p, {10, 100, 1000}, 300, 7);
  for (const auto& r : rows) EXPECT_LE(r.mean_gap, r.bound + 3 * r.std_error);
  const auto fit = gap_loglog_fit(rows);
  EXPECT_GT(fit.slope, -0.65);
  EXPECT_LT(fit.slope, -0.35);
}

TEST(GapTest, RejectsUnsortedSizes) {
  RpsEnv env(true, 1);
  const PolicyPair p{uniform_policy(2), uniform_policy(2)};
  EXPECT_THROW(mf_approx_gap(env, p, {100, 10}, 100, 1), Error);
}

TEST(RolloutTest, BattlefieldMassIsConserved) {
  BattlefieldParams bp;
  bp.map = load_named_map("battlefield_4x4", std::filesystem::path(MFTG_SOURCE_DIR) / "maps");
  BattlefieldEnv env(bp, 20);
  Rng rng(1);
  const auto [b, r] = env.initial_states(10, 10, rng);
  const PolicyPair u{uniform_policy(kGridActions), uniform_policy(kGridActions)};
  const auto traj = rollout_infinite(env, empirical_distribution(b), empirical_distribution(r), u, 20);
  for (const auto& m : traj.mus) {
    double total = 0.0;
    for (double p : m.probs()) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace mftg
