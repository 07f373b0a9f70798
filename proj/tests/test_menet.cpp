#include <gtest/gtest.h>

#include <cmath>

#include "darklighter/activation.hpp"
#include "darklighter/enhancer.hpp"
#include "darklighter/menet.hpp"
#include "test_support.hpp"

namespace dl = darklighter;
using dl::testing::naive_conv;
using dl::testing::random_params;
using dl::testing::random_tensor;

TEST(MENet, ParameterAndMacCounts) {
  EXPECT_EQ(dl::count_params(dl::zero_params<float>()), 74768u);
  EXPECT_EQ(dl::count_macs(256, 256), 4888461312ull);
  EXPECT_EQ(dl::count_macs(1, 1), 74592ull);
}

TEST(MENet, LayerShapes) {
  const dl::MENetParams<float> p;
  EXPECT_EQ(p.conv1.in_channels, 3u);
  EXPECT_EQ(p.conv2.in_channels, 32u);
  for (const auto* l : {&p.conv3, &p.conv4, &p.conv5, &p.head_e, &p.head_n}) EXPECT_EQ(l->in_channels, 64u);
  EXPECT_EQ(p.head_e.out_channels, 8u);
  EXPECT_EQ(p.head_n.out_channels, 8u);
}

TEST(MENet, ZeroParamsGiveUnitGainAndNoNoise) {
  const auto img = random_tensor<float>(3, 9, 11, 5, 0.0, 1.0);
  const auto out = dl::forward(img, dl::zero_params<float>());
  for (const auto v : out.e_stack.maps.values()) EXPECT_EQ(v, 1.0f);
  for (const auto v : out.n_stack.maps.values()) EXPECT_EQ(v, 0.0f);
}

TEST(MENet, InitIsSeededAndSmall) {
  const auto a = dl::init_params<float>(3);
  EXPECT_EQ(a, dl::init_params<float>(3));
  EXPECT_NE(a, dl::init_params<float>(4));
  for (const auto v : a.conv1.bias) EXPECT_EQ(v, 0.0f);
}

// Reference wiring built from the nested-loop convolution.
static void reference_maps(const dl::Tensor<double>& img, const dl::MENetParams<double>& p, dl::Tensor<double>& e,
                           dl::Tensor<double>& n) {
  auto relu = [](const dl::Tensor<double>& t) { return dl::activate(t, dl::Activation::relu); };
  const auto c1 = relu(naive_conv(img, p.conv1));
  const auto c2 = relu(naive_conv(c1, p.conv2));
  const auto c3 = relu(naive_conv(dl::concat_channels(c1, c2), p.conv3));
  const auto c4 = relu(naive_conv(dl::concat_channels(c2, c3), p.conv4));
  const auto c5 = relu(naive_conv(dl::concat_channels(c3, c4), p.conv5));
  const auto tail = dl::concat_channels(c4, c5);
  e = dl::activate(naive_conv(tail, p.head_e), dl::Activation::tanh);
  for (auto& v : e.values()) v += 1.0;
  n = dl::activate(naive_conv(tail, p.head_n), dl::Activation::tanh);
}

class MENetWiring : public ::testing::TestWithParam<std::pair<std::size_t, std::size_t>> {};

TEST_P(MENetWiring, MatchesReferenceGraph) {
  const auto [h, w] = GetParam();
  const auto pd = random_params<double>(8, 0.08);
  const auto img = random_tensor<double>(3, h, w, 9, 0.0, 1.0);
  dl::Tensor<double> e, n;
  reference_maps(img, pd, e, n);

  const auto od = dl::forward(img, pd);
  EXPECT_LT(dl::max_abs_diff(od.e_stack.maps, e), 1e-12);
  EXPECT_LT(dl::max_abs_diff(od.n_stack.maps, n), 1e-12);

  const auto of = dl::forward(dl::tensor_cast<float>(img), dl::params_cast<float>(pd));
  EXPECT_LT(dl::max_abs_diff(dl::tensor_cast<double>(of.e_stack.maps), e), 1e-5);
  EXPECT_LT(dl::max_abs_diff(dl::tensor_cast<double>(of.n_stack.maps), n), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Sizes, MENetWiring,
                         ::testing::Values(std::make_pair(std::size_t{5}, std::size_t{7}),
                                           std::make_pair(std::size_t{8}, std::size_t{8}),
                                           std::make_pair(std::size_t{12}, std::size_t{20})));

TEST(MENet, ForwardIntoReusesBuffersConsistently) {
  const auto p = dl::init_params<float>(1);
  const auto a = random_tensor<float>(3, 16, 16, 1, 0.0, 1.0);
  const auto b = random_tensor<float>(3, 10, 14, 2, 0.0, 1.0);
  dl::MENetOutput<float> out;
  dl::forward_into(a, p, out);
  dl::forward_into(b, p, out);
  EXPECT_EQ(out.e_stack, dl::forward(b, p).e_stack);
  dl::forward_into(a, p, out);
  EXPECT_EQ(out.n_stack, dl::forward(a, p).n_stack);
}

TEST(MENet, RejectsNonRgbInput) {
  EXPECT_THROW(dl::forward(dl::Tensor<float>(1, 8, 8), dl::zero_params<float>()), dl::ShapeError);
}
