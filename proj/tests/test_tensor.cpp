#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "darklighter/activation.hpp"
#include "darklighter/detail/fast_tanh.hpp"
#include "darklighter/detail/planes.hpp"
#include "darklighter/gradcheck.hpp"
#include "darklighter/tensor.hpp"
#include "test_support.hpp"

namespace dl = darklighter;

TEST(Tensor, ShapeAndIndexing) {
  dl::Tensor<float> t(2, 3, 4);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.plane_size(), 12u);
  t(1, 2, 3) = 5.0f;
  EXPECT_EQ(t[23], 5.0f);
  EXPECT_EQ(t.plane(1)[11], 5.0f);
  EXPECT_EQ(t.shape().to_string(), "2x3x4");
}

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(dl::Tensor<float>(dl::Shape{1, 2, 2}, std::vector<float>(3)), dl::ShapeError);
}

TEST(Tensor, ConcatThenSplitIsIdentity) {
  const auto a = dl::testing::random_tensor<float>(2, 3, 5, 1);
  const auto b = dl::testing::random_tensor<float>(3, 3, 5, 2);
  const auto c = dl::concat_channels(a, b);
  EXPECT_EQ(c.channels(), 5u);
  const auto [x, y] = dl::split_channels(c, 2);
  EXPECT_EQ(x, a);
  EXPECT_EQ(y, b);
  EXPECT_EQ(dl::slice_channels(c, 2, 3), b);
}

TEST(Tensor, ConcatRejectsSpatialMismatch) {
  EXPECT_THROW(dl::concat_channels(dl::Tensor<float>(1, 2, 2), dl::Tensor<float>(1, 2, 3)), dl::ShapeError);
  EXPECT_THROW(dl::split_channels(dl::Tensor<float>(1, 2, 2), 2), dl::ShapeError);
}

TEST(Tensor, MaxAbsDiff) {
  dl::Tensor<float> a(1, 1, 3);
  dl::Tensor<float> b(1, 1, 3);
  b[1] = -0.25f;
  EXPECT_DOUBLE_EQ(dl::max_abs_diff(a, b), 0.25);
  EXPECT_THROW(dl::max_abs_diff(a, dl::Tensor<float>(1, 3, 1)), dl::ShapeError);
}

TEST(Activation, ReluAndDerivativeAtZero) {
  dl::Tensor<double> x(dl::Shape{1, 1, 3}, std::vector<double>{-1.0, 0.0, 2.0});
  const auto y = dl::activate(x, dl::Activation::relu);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[2], 2.0);
  const auto g = dl::activation_backward(x, dl::Tensor<double>(x.shape(), 1.0), dl::Activation::relu);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 1.0);
}

TEST(Activation, TanhDerivativeMatchesFiniteDifference) {
  const auto x = dl::testing::random_tensor<double>(1, 2, 3, 7, -2.0, 2.0);
  const dl::Tensor<double> ones(x.shape(), 1.0);
  const auto analytic = dl::activation_backward(x, ones, dl::Activation::tanh);
  const auto numeric = dl::finite_diff_gradient<double>(
      [](const dl::Tensor<double>& v) {
        const auto y = dl::activate(v, dl::Activation::tanh);
        double s = 0.0;
        for (const auto e : y.values()) s += e;
        return s;
      },
      x, 1e-6);
  EXPECT_LT(dl::relative_error(analytic, numeric), 1e-8);
}

TEST(FastTanh, CloseToLibmOverTheRange) {
  std::vector<float> v;
  for (int i = -120000; i <= 120000; ++i) v.push_back(static_cast<float>(i) * 1e-4f);
  auto w = v;
  dl::detail::tanh_inplace(w.data(), w.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(w[i]) - std::tanh(static_cast<double>(v[i]))));
  }
  EXPECT_LT(worst, 1e-6);
  float zero = 0.0f;
  dl::detail::tanh_inplace(&zero, 1);
  EXPECT_EQ(zero, 0.0f);
}

TEST(GradCheck, QuadraticHasGradientTwoX) {
  const auto x = dl::testing::random_tensor<double>(2, 2, 2, 3);
  const auto g = dl::finite_diff_gradient<double>(
      [](const dl::Tensor<double>& v) {
        double s = 0.0;
        for (const auto e : v.values()) s += e * e;
        return s;
      },
      x, 1e-3);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], 2.0 * x[i], 1e-9);
}

TEST(GradCheck, RejectsNonPositiveStep) {
  EXPECT_THROW(dl::finite_diff_gradient<double>([](const dl::Tensor<double>&) { return 0.0; },
                                                dl::Tensor<double>(1, 1, 1), 0.0),
               dl::InvalidArgument);
}

TEST(GradCheck, RelativeErrorScaleFree) {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0, 2.0};
  EXPECT_EQ(dl::relative_error(a, b), 0.0);
  const std::vector<double> c{-1.0, -2.0};
  EXPECT_DOUBLE_EQ(dl::relative_error(a, c), 1.0);
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_EQ(dl::relative_error(zero, zero), 0.0);
}

TEST(Planes, RoundTripAndAlignedInterior) {
  for (const auto& [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {5, 7}, {16, 30}, {9, 64}}) {
    const auto t = dl::testing::random_tensor<float>(3, h, w, h * 100 + w);
    const auto p = dl::detail::Planes<float>::from_tensor(t);
    EXPECT_EQ(p.to_tensor(), t);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(p.interior(1)) % 64, 0u);
    // Borders stay zero.
    EXPECT_EQ(p.plane(0)[0], 0.0f);
    EXPECT_EQ(p.interior(2)[w], 0.0f);
  }
}
