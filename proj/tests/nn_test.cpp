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

#include "mftg/nn.hpp"

#include <gtest/gtest.h>

namespace mftg::nn {
namespace {

std::vector<double> randn(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& e : v) e = rng.normal();
  return v;
}

double weighted_output(const DenseNet& net, std::span<const double> x, std::span<const double> g) {
  const auto y = net.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * g[i];
  return s;
}

bool close(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  return diff <= 1e-7 || diff <= 1e-4 * std::max(std::abs(analytic), std::abs(numeric));
}

TEST(DenseNetTest, ZeroAndIdentity) {
  DenseNet zero(3, {{2, Activation::Linear}});
  EXPECT_EQ(zero.forward(std::vector<double>{1, 2, 3}), (std::vector<double>{0, 0}));
  DenseNet id(2, {{2, Activation::Linear}});
  id.weight(0)[0] = 1.0;
  id.weight(0)[3] = 1.0;
  EXPECT_EQ(id.forward(std::vector<double>{0.3, -4}), (std::vector<double>{0.3, -4}));
}

TEST(DenseNetTest, HandComputedTwoTwoOne) {
  DenseNet net(2, {{2, Activation::Relu}, {1, Activation::Linear}});
  const std::vector<double> w0{1, -1, 2, 0.5}, b0{0.1, -3}, w1{2, -1}, b1{0.5};
  std::copy(w0.begin(), w0.end(), net.weight(0).begin());
  std::copy(b0.begin(), b0.end(), net.bias(0).begin());
  std::copy(w1.begin(), w1.end(), net.weight(1).begin());
  std::copy(b1.begin(), b1.end(), net.bias(1).begin());
  // h = relu([2 - 1 + 0.1, 4 + 0.5 - 3]) = [1.1, 1.5]
  const auto y = net.forward(std::vector<double>{2, 1});
  EXPECT_DOUBLE_EQ(y[0], 2 * 1.1 - 1.5 + 0.5);
}

TEST(DenseNetTest, DimensionMismatch) {
  DenseNet net(3, {{2, Activation::Tanh}});
  EXPECT_THROW(net.forward(std::vector<double>{1, 2}), Error);
}

TEST(DenseNetTest, BackwardWithoutForward) {
  DenseNet net(3, {{2, Activation::Tanh}});
  Tape tape;
  std::vector<double> grads(net.num_params());
  EXPECT_THROW(net.backward(tape, std::vector<double>{1, 1}, grads), Error);
}

TEST(DenseNetTest, LinearInputGradIsTransposeProduct) {
  Rng rng(1);
  DenseNet net(3, {{2, Activation::Linear}});
  init_network(net, rng);
  Tape tape;
  net.forward(std::vector<double>{1, 2, 3}, &tape);
  std::vector<double> grads(net.num_params());
  const std::vector<double> g{0.7, -1.3};
  const auto dx = net.backward(tape, g, grads);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(dx[k], net.weight(0)[k] * g[0] + net.weight(0)[3 + k] * g[1], 1e-15);
  }
}

class GradientCheck : public ::testing::TestWithParam<Activation> {};

TEST_P(GradientCheck, ParamsAndInputsMatchFiniteDifferences) {
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    const std::size_t in = 2 + rng.below(4);
    DenseNet net(in, {{3 + rng.below(4), GetParam()},
                      {2 + rng.below(4), GetParam()},
                      {1 + rng.below(3), Activation::Linear}});
    for (double& p : net.params()) p = 0.7 * rng.normal();
    auto x = randn(in, rng);
    const auto g = randn(net.output_dim(), rng);
    Tape tape;
    net.forward(x, &tape);
    std::vector<double> grads(net.num_params(), 0.0);
    const auto dx = net.backward(tape, g, grads);
    for (std::size_t i = 0; i < net.num_params(); ++i) {
      const double orig = net.params()[i];
      net.params()[i] = orig + h;
      const double up = weighted_output(net, x, g);
      net.params()[i] = orig - h;
      const double down = weighted_output(net, x, g);
      net.params()[i] = orig;
      const double fd = (up - down) / (2 * h);
      ASSERT_TRUE(close(grads[i], fd)) << "param " << i << ": " << grads[i] << " vs " << fd;
    }
    for (std::size_t k = 0; k < in; ++k) {
      const double orig = x[k];
      x[k] = orig + h;
      const double up = weighted_output(net, x, g);
      x[k] = orig - h;
      const double down = weighted_output(net, x, g);
      x[k] = orig;
      const double fd = (up - down) / (2 * h);
      ASSERT_TRUE(close(dx[k], fd)) << "input " << k << ": " << dx[k] << " vs " << fd;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllActivations, GradientCheck,
                         ::testing::Values(Activation::Tanh, Activation::Relu, Activation::Linear));

TEST(DenseNetTest, DeterministicForwardBackward) {
  Rng rng(3);
  DenseNet net(4, {{8, Activation::Tanh}, {3, Activation::Linear}});
  init_network(net, rng);
  const auto x = randn(4, rng);
  Tape t1, t2;
  EXPECT_EQ(net.forward(x, &t1), net.forward(x, &t2));
  std::vector<double> g1(net.num_params()), g2(net.num_params());
  const std::vector<double> og{1, 2, 3};
  EXPECT_EQ(net.backward(t1, og, g1), net.backward(t2, og, g2));
  EXPECT_EQ(g1, g2);
}

TEST(OrthogonalInitTest, SquareAndScaled) {
  Rng rng(5);
  for (double gain : {1.0, 2.0}) {
    const auto w = orthogonal_init(4, 4, gain, rng);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        double d = 0.0;
        for (int k = 0; k < 4; ++k) d += w[k * 4 + i] * w[k * 4 + j];
        EXPECT_NEAR(d, i == j ? gain * gain : 0.0, 1e-6);
      }
    }
  }
}

TEST(OrthogonalInitTest, RectangularShapes) {
  Rng rng(6);
  const auto row = orthogonal_init(1, 7, 3.0, rng);
  double n = 0.0;
  for (double e : row) n += e * e;
  EXPECT_NEAR(std::sqrt(n), 3.0, 1e-6);
  // Tall matrix: columns orthonormal.
  const auto tall = orthogonal_init(6, 3, 1.0, rng);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 6; ++k) d += tall[k * 3 + i] * tall[k * 3 + j];
      EXPECT_NEAR(d, i == j ? 1.0 : 0.0, 1e-6);
    }
  }
  // Wide matrix: rows orthonormal.
  const auto wide = orthogonal_init(3, 6, 1.0, rng);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 6; ++k) d += wide[i * 6 + k] * wide[j * 6 + k];
      EXPECT_NEAR(d, i == j ? 1.0 : 0.0, 1e-6);
    }
  }
}

TEST(SoftmaxTest, SumsToOneAndStable) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto z = randn(5, rng);
    for (double& e : z) e *= 1e4 * rng.uniform();
    const auto p = softmax(z);
    const auto lp = log_softmax(z);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_TRUE(std::isfinite(p[i]));
      ASSERT_TRUE(std::isfinite(lp[i]) || p[i] == 0.0);
      s += p[i];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_FALSE(std::isnan(log_softmax(std::vector<double>{1e4, -1e4})[1]));
}

TEST(AdamTest, ZeroGradientLeavesParams) {
  std::vector<double> p{1.0, -2.0};
  AdamState s(2, 0.1);
  adam_step(p, std::vector<double>{0, 0}, s);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(AdamTest, FirstStepIsSignedLearningRate) {
  std::vector<double> p{1.0, 1.0, 1.0};
  AdamState s(3, 0.01);
  adam_step(p, std::vector<double>{3.0, -0.2, 50.0}, s);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p[1], 1.0 + 0.01, 1e-6);
  EXPECT_NEAR(p[2], 1.0 - 0.01, 1e-6);
}

TEST(AdamTest, ShrinksTowardQuadraticMinimizer) {
  // f(p) = (p - 3)^2 starting from 0.
  std::vector<double> p{0.0};
  AdamState s(1, 0.1);
  for (int i = 0; i < 2; ++i) adam_step(p, std::vector<double>{2 * (p[0] - 3)}, s);
  EXPECT_GT(p[0], 0.0);
  EXPECT_LT(std::abs(p[0] - 3.0), 3.0);
}

TEST(AdamTest, NonFiniteGradient) {
  std::vector<double> p{0.0};
  AdamState s(1, 0.1);
  try {
    adam_step(p, std::vector<double>{std::nan("")}, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "gradient blow-up");
  }
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  Rng rng(9);
  DenseNet net(5, {{7, Activation::Tanh}, {3, Activation::Relu}, {2, Activation::Linear}});
  init_network(net, rng, 0.01);
  std::string name;
  const auto back = deserialize_network(serialize_network(net, "blue_actor"), &name);
  EXPECT_EQ(name, "blue_actor");
  EXPECT_EQ(back.params(), net.params());
  EXPECT_EQ(back.layers().size(), 3u);
  EXPECT_EQ(back.layers()[1].activation, Activation::Relu);
}

TEST(CheckpointTest, RejectsBadMagicAndTruncation) {
  EXPECT_THROW(deserialize_network("NOT-A-CKPT\n"), Error);
  DenseNet net(2, {{2, Activation::Linear}});
  auto text = serialize_network(net, "x");
  text.resize(text.size() / 2);
  EXPECT_THROW(deserialize_network(text), Error);
}

}  // namespace
}  // namespace mftg::nn
