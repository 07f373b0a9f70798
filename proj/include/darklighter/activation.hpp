#pragma once

#include <algorithm>
#include <cmath>

#include "darklighter/tensor.hpp"

namespace darklighter {

enum class Activation { relu, tanh };

template <typename T>
Tensor<T> activate(const Tensor<T>& input, Activation kind) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = kind == Activation::relu ? std::max(input[i], T{0}) : std::tanh(input[i]);
  }
  return out;
}

/// grad * f'(input), f' evaluated at the forward input (relu'(0) = 0).
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& input, const Tensor<T>& grad, Activation kind) {
  require_same_shape(input.shape(), grad.shape(), "activation_backward");
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (kind == Activation::relu) {
      out[i] = input[i] > T{0} ? grad[i] : T{0};
    } else {
      const T t = std::tanh(input[i]);
      out[i] = grad[i] * (T{1} - t * t);
    }
  }
  return out;
}

}  // namespace darklighter
