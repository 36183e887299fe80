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

#include "mftg/eval.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace mftg {
namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

class CrossPlayTest : public ::testing::Test {
 protected:
  RpsEnv env{true, 10};
  PolicyPair analytical = crps_analytical_policy_pair();
  std::vector<NamedPolicy> blue{{"uniform", uniform_policy(2)}, {"analytical", analytical.blue}};
  std::vector<NamedPolicy> red{{"uniform", uniform_policy(2)}, {"analytical", analytical.red}};
};

TEST_F(CrossPlayTest, TableShapeAndNames) {
  const auto t = crossplay(env, blue, red, 10, 50, 50, 3);
  ASSERT_EQ(t.cells.size(), 2u);
  ASSERT_EQ(t.cells[0].size(), 2u);
  EXPECT_EQ(t.red_names, (std::vector<std::string>{"uniform", "analytical"}));
  EXPECT_EQ(t.blue_names, (std::vector<std::string>{"uniform", "analytical"}));
  EXPECT_EQ(t.cells[1][0].episodes, 10u);
}

TEST_F(CrossPlayTest, CellsMatchDirectEvaluation) {
  const auto t = crossplay(env, blue, red, 12, 40, 40, 8);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t b = 0; b < 2; ++b) {
      const auto e = evaluate_policy_pair(env, {blue[b].policy, red[r].policy}, 12, 40, 40, 8);
      EXPECT_DOUBLE_EQ(t.cells[r][b].mean, e.stats.mean);
      EXPECT_DOUBLE_EQ(t.cells[r][b].std_error, e.stats.std_error);
    }
  }
}

TEST_F(CrossPlayTest, AnalyticalDiagonalNearGameValue) {
  const auto t = crossplay(env, blue, red, 30, 1000, 1000, 5);
  EXPECT_NEAR(t.cells[1][1].mean, -1.0 / 3.0, 0.02);
}

TEST_F(CrossPlayTest, NeedsTwoPoliciesPerSide) {
  std::vector<NamedPolicy> one{blue[0]};
  EXPECT_THROW(crossplay(env, one, red, 5, 10, 10, 1), Error);
  EXPECT_THROW(crossplay(env, blue, one, 5, 10, 10, 1), Error);
}

TEST_F(CrossPlayTest, CsvHasOneRowPerCell) {
  const auto t = crossplay(env, blue, red, 4, 20, 20, 1);
  const auto rows = lines(crossplay_csv(t));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "red,blue,mean,std_error,episodes");
  EXPECT_EQ(rows[2].rfind("uniform,analytical,", 0), 0u);
  const auto j = to_json(t);
  EXPECT_EQ(j["schema"], kReportSchema);
  EXPECT_EQ(j["kind"], "crossplay");
  EXPECT_EQ(j["cells"].size(), 2u);
}

TEST(NashGapTest, AnalyticalPairHasNoGap) {
  RpsEnv env(true, 10);
  const auto traj = rollout_infinite(env, crps_initial_blue(), crps_initial_red(),
                                     crps_analytical_policy_pair(), 10);
  const auto g = nash_gap_crps(traj);
  EXPECT_LT(g.value_gap, 1e-9);
  EXPECT_LT(g.field_gap, 1e-9);
}

TEST(NashGapTest, StayPolicyKeepsFieldsAtCorners) {
  RpsEnv env(true, 10);
  // Action 1 keeps every agent in place, so both fields stay one-hot.
  const Policy stay = [](std::size_t, const Dist&, const Dist&, int) { return std::vector<double>{0, 1}; };
  const auto traj = rollout_infinite(env, crps_initial_blue(), crps_initial_red(), {stay, stay}, 10);
  const auto g = nash_gap_crps(traj);
  EXPECT_NEAR(g.field_gap, 2.0 * (2.0 / 3.0), 1e-12);
}

TEST(NashGapTest, RejectsOtherInitialization) {
  RpsEnv env(true, 10);
  const auto u = Dist::uniform(3);
  const auto traj = rollout_infinite(env, u, u, {uniform_policy(2), uniform_policy(2)}, 10);
  EXPECT_THROW(nash_gap_crps(traj), Error);
}

TEST(ScalingTest, VarianceShrinksWithPopulation) {
  RpsEnv env(true, 10);
  const PolicyPair pair{uniform_policy(2), uniform_policy(2)};
  const auto s = scaling_eval(env, pair, 100, 100, {{10, 10}, {100, 100}, {1000, 1000}}, 60, 2);
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_TRUE(s.monotone_variance);
  EXPECT_GT(s.rows[0].variance, s.rows[1].variance);
  EXPECT_GT(s.rows[1].variance, s.rows[2].variance);
  EXPECT_GT(s.rows[0].tv_to_oracle, s.rows[2].tv_to_oracle);
  // Independent check of one row against a direct evaluation.
  const auto e = evaluate_policy_pair(env, pair, 60, 100, 100, 2);
  EXPECT_NEAR(s.rows[1].mean, e.stats.mean, 1e-12);
}

TEST(ScalingTest, RejectsBadDeployments) {
  RpsEnv env(true, 10);
  const PolicyPair pair{uniform_policy(2), uniform_policy(2)};
  EXPECT_THROW(scaling_eval(env, pair, 100, 100, {{100, 200}}, 10, 1), Error);
  EXPECT_THROW(scaling_eval(env, pair, 100, 100, {{100, 100}, {100, 100}}, 10, 1), Error);
  EXPECT_THROW(scaling_eval(env, pair, 100, 100, {{100, 100}}, 1, 1), Error);
}

TEST(ReportTest, ScalingCsvAndJson) {
  ScalingReport s;
  s.rows.push_back({10, 20, -0.5, 0.25, 0.05, 0.1});
  const auto rows = lines(scaling_csv(s));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "n_blue,n_red,mean,variance,std_error,tv_to_oracle");
  EXPECT_EQ(rows[1], "10,20,-0.5,0.25,0.05,0.1");
  const auto j = to_json(s);
  EXPECT_EQ(j["kind"], "scaling");
  EXPECT_EQ(j["rows"][0]["n_red"], 20);
}

TEST(ReportTest, TrajectoryCsv) {
  EpisodeResult ep;
  ep.mus = {Dist::one_hot(3, 0), Dist::uniform(3)};
  ep.nus = {Dist::one_hot(3, 1), Dist::uniform(3)};
  const auto rows = lines(trajectory_csv({ep, ep}));
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "episode,t,team,p0,p1,p2");
  EXPECT_EQ(rows[1], "0,0,blue,1,0,0");
  EXPECT_EQ(rows[2], "0,0,red,0,1,0");
  EpisodeResult big;
  big.mus = {Dist::uniform(4)};
  big.nus = {Dist::uniform(4)};
  EXPECT_THROW(trajectory_csv({big}), Error);
}

TEST(ReportTest, EvalJson) {
  RpsEnv env(true, 10);
  const auto e = evaluate_policy_pair(env, crps_analytical_policy_pair(), 5, 10, 10, 1);
  const auto j = to_json(e);
  EXPECT_EQ(j["schema"], kReportSchema);
  EXPECT_EQ(j["episodes"], 5);
  EXPECT_EQ(j["returns"].size(), 5u);
}

}  // namespace
}  // namespace mftg
