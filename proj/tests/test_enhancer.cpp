#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "darklighter/enhancer.hpp"
#include "test_support.hpp"

namespace dl = darklighter;
using dl::testing::random_tensor;

namespace {

dl::MapStack<double> constant_stack(std::size_t iters, std::size_t h, std::size_t w, double v) {
  return dl::MapStack<double>(iters, h, w, v);
}

dl::MapStack<double> random_stack(std::size_t iters, std::size_t h, std::size_t w, std::uint64_t seed, double lo,
                                  double hi) {
  return dl::MapStack<double>(random_tensor<double>(iters, h, w, seed, lo, hi));
}

}  // namespace

TEST(Enhancer, ConstantMapRecurrence) {
  dl::Tensor<double> s0(3, 2, 2, 0.3);
  const auto r = dl::enhance(s0, constant_stack(8, 2, 2, 1.2), constant_stack(8, 2, 2, 0.01));
  double s = 0.3;
  for (int i = 0; i < 8; ++i) s = (s - 0.01) * 1.2;
  for (const auto v : r.final.values()) EXPECT_NEAR(v, 1.09195607, 1e-8);
  for (const auto v : r.final.values()) EXPECT_DOUBLE_EQ(v, s);
  ASSERT_EQ(r.intermediates.size(), 8u);
  EXPECT_NEAR(r.intermediates[0][0], 0.348, 1e-15);
  // Exported image is clamped, the estimate is not.
  for (const auto v : r.exported.values()) EXPECT_EQ(v, 1.0);
}

TEST(Enhancer, MapsBroadcastOverChannels) {
  const auto s0 = random_tensor<double>(3, 3, 4, 1, 0.0, 1.0);
  const auto e = random_stack(2, 3, 4, 2, 0.5, 2.0);
  const auto n = random_stack(2, 3, 4, 3, -0.1, 0.1);
  const auto out = dl::enhance(s0, e, n).final;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 12; ++k) {
      double s = s0.plane(c)[k];
      for (std::size_t i = 0; i < 2; ++i) s = (s - n.map(i)[k]) * e.map(i)[k];
      EXPECT_DOUBLE_EQ(out.plane(c)[k], s);
    }
  }
  EXPECT_EQ(dl::enhance_final(s0, e, n), out);
}

TEST(Enhancer, NoClampingBetweenIterations) {
  dl::Tensor<double> s0(1, 1, 1, 0.9);
  dl::MapStack<double> e(2, 1, 1);
  e.maps[0] = 2.0;
  e.maps[1] = 0.5;
  const auto r = dl::enhance(s0, e, constant_stack(2, 1, 1, 0.0));
  EXPECT_DOUBLE_EQ(r.intermediates[0][0], 1.8);
  EXPECT_DOUBLE_EQ(r.final[0], 0.9);
}

TEST(Enhancer, InvertRoundTrip) {
  const auto s0 = random_tensor<double>(3, 8, 8, 4, 0.0, 1.0);
  const auto e = random_stack(8, 8, 8, 5, 0.5, 2.0);
  const auto n = random_stack(8, 8, 8, 6, -0.2, 0.2);
  const auto back = dl::invert(dl::enhance_final(s0, e, n), e, n);
  EXPECT_LT(dl::max_abs_diff(back, s0), 1e-10);
}

TEST(Enhancer, InvertRejectsSmallGain) {
  const dl::Tensor<double> s(3, 2, 2, 0.5);
  auto e = constant_stack(8, 2, 2, 1.0);
  e.maps[17] = 0.05;
  EXPECT_THROW(dl::invert(s, e, constant_stack(8, 2, 2, 0.0)), dl::IllConditioned);
  e.maps[17] = -0.1;
  EXPECT_NO_THROW(dl::invert(s, e, constant_stack(8, 2, 2, 0.0)));
}

TEST(Enhancer, ShapeChecks) {
  const dl::Tensor<double> s(3, 4, 4);
  EXPECT_THROW(dl::enhance(s, constant_stack(8, 4, 4, 1), constant_stack(7, 4, 4, 0)), dl::ShapeError);
  EXPECT_THROW(dl::enhance(s, constant_stack(8, 4, 5, 1), constant_stack(8, 4, 5, 0)), dl::ShapeError);
  EXPECT_THROW(dl::enhance(s, dl::MapStack<double>(), dl::MapStack<double>()), dl::InvalidArgument);
}

TEST(Enhancer, FewerIterationsUseLeadingMaps) {
  const auto s0 = random_tensor<double>(3, 4, 4, 7, 0.0, 1.0);
  const auto e = random_stack(8, 4, 4, 8, 0.5, 2.0);
  const auto n = random_stack(8, 4, 4, 9, -0.1, 0.1);
  const auto full = dl::enhance(s0, e, n);
  const auto three = dl::enhance_final(s0, dl::MapStack<double>(dl::slice_channels(e.maps, 0, 3)),
                                       dl::MapStack<double>(dl::slice_channels(n.maps, 0, 3)));
  EXPECT_EQ(three, full.intermediates[2]);
}
