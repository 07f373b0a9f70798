#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "darklighter/activation.hpp"
#include "darklighter/conv.hpp"
#include "darklighter/dlwt.hpp"
#include "darklighter/weights.hpp"

namespace darklighter {

/// Activations a FeatureExtractor keeps so it can map a feature gradient
/// back onto its input.
template <typename T>
struct FeatureTrace {
  std::vector<Tensor<T>> activations;
  std::vector<std::uint32_t> pool_argmax;
};

/// Frozen image -> feature map used by the semantic fidelity loss.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  /// Throws InvalidArgument for images it cannot process.
  virtual Tensor<T> features(const Tensor<T>& image, FeatureTrace<T>* trace = nullptr) const = 0;
  /// Gradient w.r.t. the image of sum(grad_features * features(image)).
  virtual Tensor<T> input_gradient(const FeatureTrace<T>& trace, const Tensor<T>& grad_features) const = 0;
  virtual std::string description() const = 0;
};

namespace detail {

/// 2x2 stride-2 max pooling; odd trailing rows/columns are dropped. Ties go to
/// the first element in row-major order.
template <typename T>
Tensor<T> max_pool2(const Tensor<T>& in, std::vector<std::uint32_t>& argmax) {
  const std::size_t h = in.height() / 2;
  const std::size_t w = in.width() / 2;
  Tensor<T> out(in.channels(), h, w);
  argmax.assign(out.size(), 0);
  std::size_t k = 0;
  for (std::size_t c = 0; c < in.channels(); ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x, ++k) {
        std::size_t best = (c * in.height() + 2 * y) * in.width() + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * in.height() + 2 * y + dy) * in.width() + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        out[k] = in[best];
        argmax[k] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> max_pool2_backward(const Shape& in_shape, const std::vector<std::uint32_t>& argmax,
                             const Tensor<T>& grad) {
  Tensor<T> out(in_shape);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    out[argmax[k]] += grad[k];
  }
  return out;
}

}  // namespace detail

/// Four 3x3 Conv+ReLU layers (3 -> 64 -> 64 -> 128 -> 128) with a 2x2 max
/// pool after the second, matching the first two stages of a VGG-16 trunk.
/// Inputs are normalized with fixed ImageNet per-channel statistics.
template <typename T>
class ConvPrefixExtractor final : public FeatureExtractor<T> {
 public:
  static constexpr std::array<std::size_t, 5> kWidths = {3, 64, 64, 128, 128};
  static constexpr std::array<double, 3> kMean = {0.485, 0.456, 0.406};
  static constexpr std::array<double, 3> kStd = {0.229, 0.224, 0.225};

  ConvPrefixExtractor(std::array<ConvLayer<T>, 4> layers, std::string description)
      : layers_(std::move(layers)), description_(std::move(description)) {
    for (std::size_t i = 0; i < 4; ++i) {
      if (layers_[i].out_channels != kWidths[i + 1] || layers_[i].in_channels != kWidths[i]) {
        throw InvalidArgument("feature extractor layer " + std::to_string(i + 1) + " has the wrong shape");
      }
    }
  }

  /// He-normal weights from a seeded generator, zero biases.
  static ConvPrefixExtractor random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::array<ConvLayer<T>, 4> layers;
    for (std::size_t i = 0; i < 4; ++i) {
      layers[i] = ConvLayer<T>(kWidths[i + 1], kWidths[i]);
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (9.0 * static_cast<double>(kWidths[i]))));
      for (auto& w : layers[i].weight) w = static_cast<T>(normal(rng));
    }
    return ConvPrefixExtractor(std::move(layers), "random(seed=" + std::to_string(seed) + ")");
  }

  /// Loads fx.conv1..fx.conv4 weights and biases from a DLWT file.
  static ConvPrefixExtractor pretrained(const std::filesystem::path& path) {
    const auto tensors = read_dlwt(path);
    std::array<ConvLayer<T>, 4> layers;
    try {
      for (std::size_t i = 0; i < 4; ++i) {
        layers[i] = layer_cast<T>(
            extract_layer(tensors, "fx.conv" + std::to_string(i + 1), kWidths[i + 1], kWidths[i]));
      }
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
    return ConvPrefixExtractor(std::move(layers), "pretrained(" + path.string() + ")");
  }

  Tensor<T> features(const Tensor<T>& image, FeatureTrace<T>* trace = nullptr) const override {
    if (image.channels() != 3 || image.height() < 2 || image.width() < 2) {
      throw InvalidArgument("feature extractor needs a 3-channel image of at least 2x2, got " +
                            image.shape().to_string());
    }
    Tensor<T> x(image.shape());
    for (std::size_t c = 0; c < 3; ++c) {
      const T mean = static_cast<T>(kMean[c]);
      const T inv_std = static_cast<T>(1.0 / kStd[c]);
      for (std::size_t i = 0; i < image.plane_size(); ++i) {
        x.plane(c)[i] = (image.plane(c)[i] - mean) * inv_std;
      }
    }
    std::vector<std::uint32_t> argmax;
    auto a1 = activate(conv2d_forward(x, layers_[0]), Activation::relu);
    auto a2 = activate(conv2d_forward(a1, layers_[1]), Activation::relu);
    auto p = detail::max_pool2(a2, argmax);
    auto a3 = activate(conv2d_forward(p, layers_[2]), Activation::relu);
    auto a4 = activate(conv2d_forward(a3, layers_[3]), Activation::relu);
    if (trace) {
      trace->activations = {std::move(a1), std::move(a2), std::move(p), std::move(a3), a4};
      trace->pool_argmax = std::move(argmax);
    }
    return a4;
  }

  Tensor<T> input_gradient(const FeatureTrace<T>& trace, const Tensor<T>& grad_features) const override {
    if (trace.activations.size() != 5) {
      throw InvalidArgument("feature extractor: trace was not produced by this extractor");
    }
    const auto& [a1, a2, p, a3, a4] =
        std::tie(trace.activations[0], trace.activations[1], trace.activations[2], trace.activations[3],
                 trace.activations[4]);
    require_same_shape(grad_features.shape(), a4.shape(), "feature extractor gradient");
    auto relu_mask = [](const Tensor<T>& act, Tensor<T> g) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(act[i] > T{0})) g[i] = T{0};
      }
      return g;
    };
    auto g = conv2d_backward_input(layers_[3], relu_mask(a4, grad_features));
    g = conv2d_backward_input(layers_[2], relu_mask(a3, std::move(g)));
    g = detail::max_pool2_backward(a2.shape(), trace.pool_argmax, g);
    g = conv2d_backward_input(layers_[1], relu_mask(a2, std::move(g)));
    g = conv2d_backward_input(layers_[0], relu_mask(a1, std::move(g)));
    for (std::size_t c = 0; c < 3; ++c) {
      const T inv_std = static_cast<T>(1.0 / kStd[c]);
      for (std::size_t i = 0; i < g.plane_size(); ++i) g.plane(c)[i] *= inv_std;
    }
    return g;
  }

  std::string description() const override { return description_; }
  const std::array<ConvLayer<T>, 4>& layers() const { return layers_; }

 private:
  std::array<ConvLayer<T>, 4> layers_;
  std::string description_;
};

}  // namespace darklighter
