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

#include "mftg/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

namespace mftg {
namespace {

namespace fs = std::filesystem;

std::string error_of(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("mftg_config_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(ConfigTest, EmptyObjectGivesDefaults) {
  const auto c = parse_config(json::object());
  EXPECT_EQ(c.env.name, "crps");
  EXPECT_EQ(c.evaluation.episodes, 150u);
  EXPECT_EQ(c.estimation.rounds, std::vector<int>{1});
  EXPECT_EQ(c.sweep.parameter, "rounds");
  EXPECT_EQ(c.evaluation.blue.kind, "checkpoint");
}

TEST(ConfigTest, SeedPropagatesToTraining) {
  const auto c = parse_config({{"seed", 42}, {"train", {{"total_steps", 500}}}});
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.train.total_steps, 500);
}

TEST(ConfigTest, UnknownKeysAreRejectedWithTheirPath) {
  EXPECT_EQ(error_of({{"trian", json::object()}}), "config: unknown key 'trian'");
  EXPECT_EQ(error_of({{"train", {{"lr", 0.1}}}}), "config: unknown key 'train.lr'");
  EXPECT_EQ(error_of({{"env", {{"battlefield", {{"alpha", 1}}}}}}),
            "config: unknown key 'env.battlefield.alpha'");
}

TEST(ConfigTest, WrongTypesAreRejected) {
  EXPECT_EQ(error_of({{"seed", "one"}}), "config: 'seed' has the wrong type");
  EXPECT_EQ(error_of({{"train", {{"epochs", "ten"}}}}), "config: 'train.epochs' has the wrong type");
}

TEST(ConfigTest, InvalidValuesAreRejected) {
  EXPECT_NE(error_of({{"train", {{"clip", 1.5}}}}), "");
  EXPECT_NE(error_of({{"estimation", {{"rounds", {-1}}}}}), "");
  EXPECT_NE(error_of({{"estimation", {{"sigma", {-0.5}}}}}), "");
  EXPECT_NE(error_of({{"estimation", {{"connectivity", "patch"}}}}), "");
  EXPECT_NE(error_of({{"estimation", {{"estimator", "kalman"}}}}), "");
  EXPECT_NE(error_of({{"sweep", {{"parameter", "epochs"}}}}), "");
  EXPECT_NE(error_of({{"train", {{"critic_mode", "central"}}}}), "");
  EXPECT_NE(error_of({{"evaluation", {{"blue", {{"kind", "oracle"}}}}}}), "");
}

TEST(ConfigTest, PolicySourceShorthand) {
  const auto c = parse_config({{"crossplay",
                                {{"blue", {"uniform", "runs/a/blue_actor.ckpt"}},
                                 {"red", {{{"name", "r"}, {"kind", "analytical"}}}}}}});
  ASSERT_EQ(c.crossplay_blue.size(), 2u);
  EXPECT_EQ(c.crossplay_blue[0].kind, "uniform");
  EXPECT_EQ(c.crossplay_blue[1].kind, "checkpoint");
  EXPECT_EQ(c.crossplay_blue[1].name, "blue_actor");
  EXPECT_EQ(c.crossplay_red[0].name, "r");
}

TEST(ConfigTest, EstimationFields) {
  const auto c = parse_config({{"estimation",
                                {{"estimator", "benchmark"},
                                 {"rounds", {1, 2, 3}},
                                 {"connectivity", "bridge"},
                                 {"view_radius", 1}}}});
  EXPECT_EQ(c.estimation.estimator, Estimator::Benchmark);
  EXPECT_EQ(c.estimation.rounds, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(c.estimation.connectivity, Connectivity::Bridge);
  EXPECT_EQ(c.estimation.view_radius, 1u);
}

TEST(ConfigTest, ResolvedSnapshotRoundTrips) {
  const json in{{"seed", 7},
                {"env", {{"name", "battlefield"}, {"map", "battlefield_4x4"}, {"horizon", 20}}},
                {"train", {{"grad_penalty", 0.1}, {"actor_hidden", {32, 16}}, {"activation", "relu"}}},
                {"estimation", {{"rounds", {0, 3}}, {"sigma", {0.0, 0.01}}}},
                {"evaluation", {{"deploy_n", {100, 1000}}}},
                {"sweep", {{"parameter", "sigma"}, {"values", {0.0, 0.1}}}}};
  const auto c = parse_config(in);
  const auto snap = to_json(c);
  const auto again = parse_config(snap);
  EXPECT_EQ(to_json(again), snap);
  EXPECT_EQ(again.train.actor_hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(again.train.activation, nn::Activation::Relu);
  EXPECT_DOUBLE_EQ(again.train.grad_penalty, 0.1);
}

TEST(ConfigTest, LoadAcceptsCommentsAndReportsMissingFiles) {
  const auto dir = temp_dir("load");
  {
    std::ofstream f(dir / "run.json");
    f << "// comment\n{\"seed\": 3, /* inline */ \"env\": {\"name\": \"rps\", \"horizon\": 1}}\n";
  }
  const auto c = load_config(dir / "run.json");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.env.name, "rps");
  try {
    load_config(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("config file not found: ", 0), 0u);
  }
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"seed\": ";
  }
  EXPECT_THROW(load_config(dir / "bad.json"), Error);
}

TEST(ConfigTest, ShippedPresetsParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(MFTG_SOURCE_DIR) / "configs")) {
    SCOPED_TRACE(entry.path().string());
    const auto c = load_config(entry.path());
    EnvConfig env = c.env;
    env.maps_dir = fs::path(MFTG_SOURCE_DIR) / "maps";
    EXPECT_NO_THROW(make_environment(env));
  }
}

TEST(LoadPolicyTest, BuiltInKinds) {
  RpsEnv crps(true, 10);
  RpsEnv rps(false, 1);
  const auto p = load_policy({"u", "uniform", ""}, rps, Team::Blue, ".");
  EXPECT_EQ(p(0, Dist::uniform(3), Dist::uniform(3), 0).size(), 3u);
  const auto a = load_policy({"a", "analytical", ""}, crps, Team::Red, ".");
  EXPECT_EQ(a(0, crps_initial_blue(), crps_initial_red(), 0).size(), 2u);
  EXPECT_THROW(load_policy({"a", "analytical", ""}, rps, Team::Blue, "."), Error);
  EXPECT_THROW(load_policy({"n", "navigation", ""}, rps, Team::Blue, "."), Error);
}

TEST(LoadPolicyTest, CheckpointsResolveAgainstBaseAndCheckShape) {
  const auto dir = temp_dir("ckpt");
  RpsEnv crps(true, 10);
  nn::DenseNet actor(9, {{8, nn::Activation::Tanh}, {2, nn::Activation::Linear}});
  nn::save_network(actor, "blue_actor", dir / "blue_actor.ckpt");
  const auto p = load_policy({"b", "checkpoint", "blue_actor.ckpt"}, crps, Team::Blue, dir);
  const auto probs = p(0, Dist::uniform(3), Dist::uniform(3), 0);
  EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-12);
  try {
    load_policy({"b", "checkpoint", "nope.ckpt"}, crps, Team::Blue, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("checkpoint not found: ", 0), 0u);
  }
  nn::DenseNet wrong(5, {{8, nn::Activation::Tanh}, {2, nn::Activation::Linear}});
  nn::save_network(wrong, "blue_actor", dir / "wrong.ckpt");
  EXPECT_THROW(load_policy({"w", "checkpoint", "wrong.ckpt"}, crps, Team::Blue, dir), Error);
}

}  // namespace
}  // namespace mftg
