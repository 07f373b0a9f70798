#include <gtest/gtest.h>

#include <cmath>

#include "darklighter/adam.hpp"
#include "test_support.hpp"

namespace dl = darklighter;

namespace {

dl::AdamState fresh_state() { return {dl::zero_params<float>(), dl::zero_params<float>(), 0, {}}; }

}  // namespace

TEST(Adam, DefaultHyperparameters) {
  const dl::AdamConfig c;
  EXPECT_FLOAT_EQ(c.beta1, 0.9f);
  EXPECT_FLOAT_EQ(c.beta2, 0.999f);
  EXPECT_FLOAT_EQ(c.epsilon, 1e-8f);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = dl::testing::random_params<float>(1, 0.1);
  const auto before = p;
  auto s = fresh_state();
  dl::adam_step(p, dl::zero_params<float>(), s, 1e-4f);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = dl::zero_params<float>();
  auto g = dl::zero_params<float>();
  g.conv1.weight[0] = 3.0f;
  g.head_n.bias[7] = -0.02f;
  auto s = fresh_state();
  dl::adam_step(p, g, s, 1e-4f);
  EXPECT_NEAR(p.conv1.weight[0], -1e-4f, 1e-9f);
  EXPECT_NEAR(p.head_n.bias[7], 1e-4f, 1e-9f);
  EXPECT_EQ(p.conv1.weight[1], 0.0f);
  EXPECT_NEAR(s.m.conv1.weight[0], 0.3f, 1e-7f);
  EXPECT_NEAR(s.v.conv1.weight[0], 0.009f, 1e-6f);
}

TEST(Adam, MatchesScalarReference) {
  auto p = dl::zero_params<float>();
  auto s = fresh_state();
  double theta = 0.0, m = 0.0, v = 0.0;
  const double grads[] = {0.5, -1.0, 0.25, 2.0};
  for (int t = 1; t <= 4; ++t) {
    auto g = dl::zero_params<float>();
    g.conv2.weight[5] = static_cast<float>(grads[t - 1]);
    dl::adam_step(p, g, s, 1e-3f);
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    theta -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.conv2.weight[5], theta, 1e-7);
}

TEST(Adam, RejectsBadInputs) {
  auto p = dl::zero_params<float>();
  auto s = fresh_state();
  EXPECT_THROW(dl::adam_step(p, dl::zero_params<float>(), s, 0.0f), dl::InvalidArgument);
  auto g = dl::zero_params<float>();
  g.conv3.bias.pop_back();
  EXPECT_THROW(dl::adam_step(p, g, s, 1e-4f), dl::ShapeError);
}
