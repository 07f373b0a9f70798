#pragma once

#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include "darklighter/detail/conv_kernels.hpp"
#include "darklighter/detail/planes.hpp"
#include "darklighter/detail/winograd.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter {

/// 3x3, stride 1, zero-padding 1 convolution parameters.
/// `weight` is [out_channels][in_channels][3][3] row-major.
template <typename T>
struct ConvLayer {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  ConvLayer() = default;
  ConvLayer(std::size_t out, std::size_t in) : out_channels(out), in_channels(in), weight(out * in * 9), bias(out) {}

  std::size_t param_count() const { return weight.size() + bias.size(); }
  T& w(std::size_t o, std::size_t c, std::size_t dy, std::size_t dx) {
    return weight[((o * in_channels + c) * 3 + dy) * 3 + dx];
  }
  const T& w(std::size_t o, std::size_t c, std::size_t dy, std::size_t dx) const {
    return weight[((o * in_channels + c) * 3 + dy) * 3 + dx];
  }
  bool operator==(const ConvLayer&) const = default;
};

template <typename To, typename From>
ConvLayer<To> layer_cast(const ConvLayer<From>& l) {
  ConvLayer<To> out(l.out_channels, l.in_channels);
  for (std::size_t i = 0; i < l.weight.size(); ++i) out.weight[i] = static_cast<To>(l.weight[i]);
  for (std::size_t i = 0; i < l.bias.size(); ++i) out.bias[i] = static_cast<To>(l.bias[i]);
  return out;
}

template <typename T>
struct ConvGradients {
  Tensor<T> input;
  ConvLayer<T> layer;
};

namespace detail {

template <typename T>
void check_conv_input(const Shape& input, const ConvLayer<T>& layer, const char* what) {
  if (input.channels != layer.in_channels) {
    throw ShapeError(std::string(what) + ": input " + input.to_string() + " has " + std::to_string(input.channels) +
                     " channels but layer expects " + std::to_string(layer.out_channels) + "x" +
                     std::to_string(layer.in_channels) + "x3x3");
  }
  if (input.height == 0 || input.width == 0) {
    throw ShapeError(std::string(what) + ": empty input " + input.to_string());
  }
}

/// Convolution from planes `in` (channels [in_first, in_first + in_channels))
/// into planes `out` (channels starting at out_first), border cells cleared.
template <typename T>
void conv_planes(const Planes<T>& in, std::size_t in_first, const ConvLayer<T>& layer, Planes<T>& out,
                 std::size_t out_first, FlatConvOptions opt) {
#if defined(__AVX512F__)
  if constexpr (std::is_same_v<T, float>) {
    if (winograd::applicable(in.height(), in.width())) {
      winograd::conv3x3(in.plane(in_first), in.stride(), layer.in_channels, layer.weight.data(), layer.bias.data(),
                        layer.out_channels, out.interior(out_first), out.stride(), in.pitch(), in.height(),
                        in.width(), opt);
      return;
    }
  }
#endif
  conv3x3_flat(in.plane(in_first), in.stride(), layer.in_channels, layer.weight.data(), layer.bias.data(),
               layer.out_channels, out.interior(out_first), out.stride(), in.pitch(), in.flat_count(), opt);
  out.clear_margins(out_first, layer.out_channels);
}

/// Accumulates weight/bias gradients from output gradient planes (borders zero).
template <typename T>
void conv_planes_weight_grad(const Planes<T>& grad, std::size_t grad_first, const Planes<T>& in,
                             std::size_t in_first, ConvLayer<T>& grad_layer) {
  conv3x3_weight_grad(grad.interior(grad_first), grad.stride(), grad_layer.out_channels, in.plane(in_first),
                      in.stride(), grad_layer.in_channels, in.pitch(), in.flat_count(), grad_layer.weight.data(),
                      grad_layer.bias.data());
}

/// Input gradient of `layer` from grad planes, written (or added) into
/// `grad_in` channels starting at in_first.
template <typename T>
void conv_planes_input_grad(const Planes<T>& grad, std::size_t grad_first, const ConvLayer<T>& layer,
                            Planes<T>& grad_in, std::size_t in_first, bool accumulate) {
  const auto adj = adjoint_weights(layer.weight.data(), layer.out_channels, layer.in_channels);
  const FlatConvOptions opt{.accumulate = accumulate, .relu = false};
#if defined(__AVX512F__)
  if constexpr (std::is_same_v<T, float>) {
    if (winograd::applicable(grad.height(), grad.width())) {
      winograd::conv3x3(grad.plane(grad_first), grad.stride(), layer.out_channels, adj.data(), nullptr,
                        layer.in_channels, grad_in.interior(in_first), grad_in.stride(), grad.pitch(), grad.height(),
                        grad.width(), opt);
      return;
    }
  }
#endif
  conv3x3_flat<T>(grad.plane(grad_first), grad.stride(), layer.out_channels, adj.data(), nullptr,
                  layer.in_channels, grad_in.interior(in_first), grad_in.stride(), grad.pitch(), grad.flat_count(), opt);
  grad_in.clear_margins(in_first, layer.in_channels);
}

}  // namespace detail

/// out[o,y,x] = bias[o] + sum_{c,dy,dx} w[o,c,dy,dx] * in_padded[c, y+dy, x+dx].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
  detail::check_conv_input(input.shape(), layer, "conv2d_forward");
  const auto in = detail::Planes<T>::from_tensor(input);
  detail::Planes<T> out(layer.out_channels, input.height(), input.width());
  detail::conv_planes(in, 0, layer, out, 0, {});
  return out.to_tensor();
}

/// Gradients of sum(grad_out * conv2d_forward(input, layer)).
template <typename T>
ConvGradients<T> conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer, const Tensor<T>& grad_out) {
  detail::check_conv_input(input.shape(), layer, "conv2d_backward");
  require_same_shape(grad_out.shape(), Shape{layer.out_channels, input.height(), input.width()},
                     "conv2d_backward grad_out");
  const auto in = detail::Planes<T>::from_tensor(input);
  const auto grad = detail::Planes<T>::from_tensor(grad_out);

  ConvGradients<T> result{Tensor<T>(), ConvLayer<T>(layer.out_channels, layer.in_channels)};
  detail::conv_planes_weight_grad(grad, 0, in, 0, result.layer);
  detail::Planes<T> grad_in(layer.in_channels, input.height(), input.width());
  detail::conv_planes_input_grad(grad, 0, layer, grad_in, 0, false);
  result.input = grad_in.to_tensor();
  return result;
}

/// Input half of conv2d_backward, for frozen layers.
template <typename T>
Tensor<T> conv2d_backward_input(const ConvLayer<T>& layer, const Tensor<T>& grad_out) {
  if (grad_out.channels() != layer.out_channels) {
    throw ShapeError("conv2d_backward_input: grad_out " + grad_out.shape().to_string() + " does not match " +
                     std::to_string(layer.out_channels) + " output channels");
  }
  const auto grad = detail::Planes<T>::from_tensor(grad_out);
  detail::Planes<T> grad_in(layer.in_channels, grad_out.height(), grad_out.width());
  detail::conv_planes_input_grad(grad, 0, layer, grad_in, 0, false);
  return grad_in.to_tensor();
}

}  // namespace darklighter
