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

#include "mftg/core.hpp"

#include <gtest/gtest.h>

namespace mftg {
namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& e : v) e = scale * (2.0 * rng.uniform() - 0.5);
  return v;
}

// Random constraint set with k pinned coordinates and a feasible total.
ConstraintSet random_constraints(std::size_t n, Rng& rng) {
  std::map<std::size_t, double> pinned;
  const std::size_t k = rng.below(n);
  const auto w = sample_flat_dirichlet(n, 1.0, rng);
  for (std::size_t i = 0; i < k; ++i) pinned[rng.below(n)] = 0.0;
  for (auto& [idx, value] : pinned) value = w[idx];
  return ConstraintSet(pinned);
}

std::vector<double> random_member(std::size_t n, const ConstraintSet& c, Rng& rng) {
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.is_pinned(i)) free_idx.push_back(i);
  }
  std::vector<double> w(n, 0.0);
  for (const auto& [idx, value] : c.pinned()) w[idx] = value;
  const auto f = sample_flat_dirichlet(free_idx.size(), c.free_mass(), rng);
  for (std::size_t k = 0; k < free_idx.size(); ++k) w[free_idx[k]] = f[k];
  return w;
}

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

TEST(DistTest, RejectsInvalidEntries) {
  EXPECT_THROW(Dist({0.5, 0.6}), Error);
  EXPECT_THROW(Dist({-0.1, 1.1}), Error);
  EXPECT_THROW(Dist(std::vector<double>{}), Error);
  EXPECT_NO_THROW(Dist({0.5, 0.5 + 1e-10}));
}

TEST(DistTest, RenormalizesOnlySmallDrift) {
  const Dist d({0.5, 0.5 + 1e-8});
  EXPECT_NEAR(d[0] + d[1], 1.0, 1e-15);
  const Dist exact({0.25, 0.75});
  EXPECT_EQ(exact[0], 0.25);
}

TEST(EmpiricalDistributionTest, CountsAgents) {
  EXPECT_EQ(empirical_distribution(JointTeamState({0, 0, 1, 2}, 3)).probs(),
            (std::vector<double>{0.5, 0.25, 0.25}));
  EXPECT_EQ(empirical_distribution(JointTeamState({1, 1, 1}, 3)).probs(),
            (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(empirical_distribution(JointTeamState({0, 1}, 2)).probs(),
            (std::vector<double>{0.5, 0.5}));
}

TEST(EmpiricalDistributionTest, EmptyPopulation) {
  try {
    empirical_distribution(JointTeamState({}, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty population");
  }
}

TEST(EmpiricalDistributionTest, PermutationInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> s(20);
    for (auto& e : s) e = rng.below(6);
    const auto a = empirical_distribution(JointTeamState(s, 6));
    std::shuffle(s.begin(), s.end(), std::mt19937_64(trial));
    EXPECT_EQ(a, empirical_distribution(JointTeamState(s, 6)));
  }
}

TEST(EmpiricalDistributionTest, RejectsOutOfRangeState) {
  EXPECT_THROW(JointTeamState({3}, 3), Error);
}

TEST(TvDistanceTest, Examples) {
  EXPECT_DOUBLE_EQ(tv_distance(Dist({1, 0, 0}), Dist({0, 1, 0})), 1.0);
  const Dist p({0.2, 0.3, 0.5});
  EXPECT_DOUBLE_EQ(tv_distance(p, p), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(Dist({0.5, 0.5}), Dist({0.25, 0.75})), 0.25);
  EXPECT_THROW(tv_distance(Dist({1.0}), Dist({0.5, 0.5})), Error);
}

TEST(TvDistanceTest, TriangleInequalityAndSymmetry) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const Dist p(sample_flat_dirichlet(5, 1.0, rng));
    const Dist q(sample_flat_dirichlet(5, 1.0, rng));
    const Dist r(sample_flat_dirichlet(5, 1.0, rng));
    EXPECT_LE(tv_distance(p, r), tv_distance(p, q) + tv_distance(q, r) + 1e-15);
    EXPECT_EQ(tv_distance(p, q), tv_distance(q, p));
    EXPECT_GE(tv_distance(p, q), 0.0);
    EXPECT_LE(tv_distance(p, q), 1.0);
  }
}

TEST(ProjectionTest, SingleFreeCoordinate) {
  const auto out = project_constrained_simplex(std::vector<double>{0.5, 0.5}, ConstraintSet({{0, 0.2}}));
  EXPECT_EQ(out[0], 0.2);
  EXPECT_NEAR(out[1], 0.8, 1e-15);
}

TEST(ProjectionTest, FixedPoint) {
  const std::vector<double> v{0.1, 0.3, 0.6};
  const auto out = project_constrained_simplex(v, ConstraintSet({{1, 0.3}}));
  EXPECT_EQ(out.probs(), v);
}

TEST(ProjectionTest, AgreesWithGridSearch) {
  const std::vector<double> v{0.6, 0.6, 0.0};
  const ConstraintSet c({{2, 0.0}});
  const auto out = project_constrained_simplex(v, c);
  double best = 1e9, best_w0 = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double w0 = k * 1e-3;
    const std::vector<double> w{w0, 1.0 - w0, 0.0};
    const double d = l2(v, w);
    if (d < best) best = d, best_w0 = w0;
  }
  EXPECT_NEAR(out[0], best_w0, 2e-3);
  EXPECT_NEAR(out[1], 1.0 - best_w0, 2e-3);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_NEAR(out[0], 0.5, 1e-12);
}

TEST(ProjectionTest, InfeasibleConstraintSet) {
  try {
    ConstraintSet({{0, 0.7}, {1, 0.4}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "infeasible constraint set");
  }
}

TEST(ProjectionTest, FreeMassClampedAtZero) {
  const ConstraintSet c({{0, 0.5}, {1, 0.5 + 5e-10}});
  EXPECT_EQ(c.free_mass(), 0.0);
  const auto out = project_constrained(std::vector<double>{0.1, 0.1, 0.8}, c);
  EXPECT_EQ(out[2], 0.0);
}

TEST(ProjectionTest, RandomIdempotenceAndNonExpansiveness) {
  Rng rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(10);
    const auto c = random_constraints(n, rng);
    const auto v = random_vector(n, rng, 2.0);
    const auto p = project_constrained(v, c);
    ASSERT_TRUE(c.contains(p, 1e-9));
    for (const auto& [idx, value] : c.pinned()) ASSERT_EQ(p[idx], value);
    ASSERT_EQ(project_constrained(p, c), p);
    const auto w = random_member(n, c, rng);
    ASSERT_LE(l2(p, w), l2(v, w) + 1e-12);
  }
}

TEST(ProjectionTest, FreeCoordinatesAreOptimal) {
  // Perturbing the projection inside the feasible set never gets closer.
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(5);
    const auto c = random_constraints(n, rng);
    const auto v = random_vector(n, rng);
    const auto p = project_constrained(v, c);
    for (int k = 0; k < 20; ++k) {
      const auto w = random_member(n, c, rng);
      std::vector<double> mix(n);
      for (std::size_t i = 0; i < n; ++i) mix[i] = 0.9 * p[i] + 0.1 * w[i];
      ASSERT_LE(l2(v, p), l2(v, mix) + 1e-12);
    }
  }
}

TEST(SampleCategoricalTest, DegenerateAndFrequency) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_categorical(Dist({1, 0, 0}), rng), 0u);
    EXPECT_EQ(sample_categorical(Dist({0, 0, 1}), rng), 2u);
  }
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample_categorical(Dist({0.5, 0.5}), rng) == 0;
  EXPECT_GE(zeros / 1e5, 0.49);
  EXPECT_LE(zeros / 1e5, 0.51);
}

TEST(SampleCategoricalTest, DeterministicGivenSeed) {
  Rng a(99), b(99);
  const Dist p({0.2, 0.3, 0.5});
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_categorical(p, a), sample_categorical(p, b));
}

TEST(SeedTest, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
  EXPECT_EQ(derive_seed(3, "x", 4), derive_seed(3, "x", 4));
}

TEST(DiscretizeTest, RoundTrip) {
  const Dist mu({0.25, 0.5, 0.25});
  EXPECT_EQ(empirical_distribution(discretize(mu, 8)), mu);
  EXPECT_THROW(discretize(mu, 6), Error);
}

TEST(FitLineTest, RecoversSlope) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{1, 3, 5, 7};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, -1.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

}  // namespace
}  // namespace mftg
