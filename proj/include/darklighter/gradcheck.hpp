#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "darklighter/error.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter {

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for every element of `at`.
template <typename T>
Tensor<T> finite_diff_gradient(const std::function<double(const Tensor<T>&)>& f, const Tensor<T>& at, double eps) {
  if (!(eps > 0.0)) {
    throw InvalidArgument("finite_diff_gradient: eps must be positive");
  }
  Tensor<T> x = at;
  Tensor<T> grad(at.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = static_cast<T>(saved + eps);
    const double up = f(x);
    x[i] = static_cast<T>(saved - eps);
    const double down = f(x);
    x[i] = saved;
    grad[i] = static_cast<T>((up - down) / (2.0 * eps));
  }
  return grad;
}

/// ||a - b|| / max(||a|| + ||b||, floor); the floor keeps two vanishing
/// gradients from reporting a spurious error.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric,
                             double floor = 1e-12) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("relative_error: length mismatch");
  }
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nb += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), floor);
}

inline double relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric, double floor = 1e-12) {
  require_same_shape(analytic.shape(), numeric.shape(), "relative_error");
  return relative_error(analytic.values(), numeric.values(), floor);
}

}  // namespace darklighter
