#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "darklighter/conv.hpp"
#include "darklighter/detail/fast_tanh.hpp"
#include "darklighter/detail/planes.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter {

/// Number of illumination/noise peel-off steps produced per forward pass.
inline constexpr std::size_t kIterations = 8;

/// Per-iteration stack of single-channel maps, one channel per iteration.
template <typename T>
struct MapStack {
  Tensor<T> maps;

  MapStack() = default;
  MapStack(std::size_t iterations, std::size_t height, std::size_t width, T fill = T{0})
      : maps(iterations, height, width, fill) {}
  explicit MapStack(Tensor<T> t) : maps(std::move(t)) {}

  std::size_t iterations() const { return maps.channels(); }
  std::size_t height() const { return maps.height(); }
  std::size_t width() const { return maps.width(); }
  std::size_t pixels() const { return maps.plane_size(); }
  T* map(std::size_t i) { return maps.plane(i); }
  const T* map(std::size_t i) const { return maps.plane(i); }

  bool operator==(const MapStack&) const = default;
};

/// Weights of the map-estimation network: five shared Conv+ReLU layers with
/// skip concatenations and two Conv+Tanh heads.
///
///   conv1: image -> 32        conv2: conv1 -> 32
///   conv3: conv1|conv2 -> 32  conv4: conv2|conv3 -> 32  conv5: conv3|conv4 -> 32
///   head_e, head_n: conv4|conv5 -> 8 each
template <typename T>
struct MENetParams {
  ConvLayer<T> conv1{32, 3};
  ConvLayer<T> conv2{32, 32};
  ConvLayer<T> conv3{32, 64};
  ConvLayer<T> conv4{32, 64};
  ConvLayer<T> conv5{32, 64};
  ConvLayer<T> head_e{kIterations, 64};
  ConvLayer<T> head_n{kIterations, 64};

  static constexpr std::array<std::string_view, 7> kLayerNames = {"conv1", "conv2",  "conv3", "conv4",
                                                                   "conv5", "head_e", "head_n"};

  std::array<ConvLayer<T>*, 7> layers() { return {&conv1, &conv2, &conv3, &conv4, &conv5, &head_e, &head_n}; }
  std::array<const ConvLayer<T>*, 7> layers() const {
    return {&conv1, &conv2, &conv3, &conv4, &conv5, &head_e, &head_n};
  }

  bool operator==(const MENetParams&) const = default;
};

template <typename To, typename From>
MENetParams<To> params_cast(const MENetParams<From>& p) {
  MENetParams<To> out;
  auto dst = out.layers();
  auto src = p.layers();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    *dst[i] = layer_cast<To>(*src[i]);
  }
  return out;
}

template <typename T>
std::size_t count_params(const MENetParams<T>& params) {
  std::size_t n = 0;
  for (const auto* l : params.layers()) {
    n += l->param_count();
  }
  return n;
}

/// Multiply-accumulates of one forward pass at H x W. Per pixel:
/// 3*32*9 + 32*32*9 + 3 * (64*32*9) + 2 * (64*8*9) = 74,592.
inline std::uint64_t count_macs(std::uint64_t height, std::uint64_t width) {
  constexpr std::uint64_t per_pixel = 3 * 32 * 9 + 32 * 32 * 9 + 3 * (64 * 32 * 9) + 2 * (64 * 8 * 9);
  return height * width * per_pixel;
}

/// Weights ~ Normal(0, 0.02), biases zero.
template <typename T>
MENetParams<T> init_params(std::uint64_t seed) {
  MENetParams<T> params;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto* l : params.layers()) {
    for (auto& w : l->weight) {
      w = static_cast<T>(normal(rng));
    }
  }
  return params;
}

/// All-zero parameters: every E_i is 1 and every N_i is 0.
template <typename T>
MENetParams<T> zero_params() {
  return MENetParams<T>{};
}

/// Activations kept by forward for the backward pass.
template <typename T>
struct ForwardCache {
  detail::Planes<T> image;     // 3 channels
  detail::Planes<T> features;  // conv1..conv5 outputs, 32 channels each
  detail::Planes<T> head_planes;
  Tensor<T> heads;  // tanh outputs: 8 for E, then 8 for N
};

template <typename T>
struct MENetOutput {
  MapStack<T> e_stack;
  MapStack<T> n_stack;
  ForwardCache<T> cache;
};

namespace detail {

// Channel offsets of each conv output inside ForwardCache::features. Storing
// the outputs back to back makes every skip concatenation a contiguous range.
inline constexpr std::size_t kFeatureWidth = 32;
inline constexpr std::size_t kFeatureChannels = 5 * kFeatureWidth;

template <typename T>
ConvLayer<T> fused_heads(const MENetParams<T>& p) {
  ConvLayer<T> heads(2 * kIterations, 64);
  std::copy(p.head_e.weight.begin(), p.head_e.weight.end(), heads.weight.begin());
  std::copy(p.head_n.weight.begin(), p.head_n.weight.end(),
            heads.weight.begin() + static_cast<std::ptrdiff_t>(p.head_e.weight.size()));
  std::copy(p.head_e.bias.begin(), p.head_e.bias.end(), heads.bias.begin());
  std::copy(p.head_n.bias.begin(), p.head_n.bias.end(), heads.bias.begin() + kIterations);
  return heads;
}

}  // namespace detail

/// Runs the network on a 3-channel image, reusing `out`'s buffers when they
/// already have the right size. E_i = 1 + tanh(.) lies in [0,2]; N_i = tanh(.)
/// lies in [-1,1].
template <typename T>
void forward_into(const Tensor<T>& image, const MENetParams<T>& params, MENetOutput<T>& out) {
  if (image.channels() != 3) {
    throw ShapeError("menet forward: expected a 3-channel image, got " + image.shape().to_string());
  }
  if (image.height() == 0 || image.width() == 0) {
    throw ShapeError("menet forward: empty image " + image.shape().to_string());
  }
  using detail::kFeatureWidth;
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  auto& cache = out.cache;
  // Reused planes keep zero borders: kernels clear them and loads only touch interiors.
  if (!cache.image.matches(3, h, w)) cache.image = detail::Planes<T>(3, h, w);
  if (!cache.features.matches(detail::kFeatureChannels, h, w)) {
    cache.features = detail::Planes<T>(detail::kFeatureChannels, h, w);
  }
  if (!cache.head_planes.matches(2 * kIterations, h, w)) cache.head_planes = detail::Planes<T>(2 * kIterations, h, w);
  const Shape head_shape{2 * kIterations, h, w};
  if (cache.heads.shape() != head_shape) cache.heads = Tensor<T>(head_shape);
  if (out.e_stack.maps.shape() != Shape{kIterations, h, w}) out.e_stack = MapStack<T>(kIterations, h, w);
  if (out.n_stack.maps.shape() != Shape{kIterations, h, w}) out.n_stack = MapStack<T>(kIterations, h, w);

  cache.image.load(image, 0);
  auto& f = cache.features;
  const detail::FlatConvOptions relu{.accumulate = false, .relu = true};
  detail::conv_planes(cache.image, 0, params.conv1, f, 0, relu);
  detail::conv_planes(f, 0, params.conv2, f, kFeatureWidth, relu);
  detail::conv_planes(f, 0, params.conv3, f, 2 * kFeatureWidth, relu);
  detail::conv_planes(f, kFeatureWidth, params.conv4, f, 3 * kFeatureWidth, relu);
  detail::conv_planes(f, 2 * kFeatureWidth, params.conv5, f, 4 * kFeatureWidth, relu);
  detail::conv_planes(f, 3 * kFeatureWidth, detail::fused_heads(params), cache.head_planes, 0, {});
  cache.head_planes.copy_to(cache.heads, 0);
  detail::tanh_inplace(cache.heads.data(), cache.heads.size());

  const std::size_t n = kIterations * h * w;
  const T* t = cache.heads.data();
  T* e = out.e_stack.maps.data();
  T* nm = out.n_stack.maps.data();
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = T{1} + t[i];
    nm[i] = t[n + i];
  }
}

template <typename T>
MENetOutput<T> forward(const Tensor<T>& image, const MENetParams<T>& params) {
  MENetOutput<T> out;
  forward_into(image, params, out);
  return out;
}

/// Parameter gradients of sum(grad_e * E + grad_n * N) for the pass that produced `cache`.
template <typename T>
MENetParams<T> backward(const ForwardCache<T>& cache, const MENetParams<T>& params, const MapStack<T>& grad_e,
                        const MapStack<T>& grad_n) {
  using detail::kFeatureWidth;
  const auto& f = cache.features;
  const std::size_t h = f.height();
  const std::size_t w = f.width();
  const Shape stack_shape{kIterations, h, w};
  require_same_shape(grad_e.maps.shape(), stack_shape, "menet backward grad_e");
  require_same_shape(grad_n.maps.shape(), stack_shape, "menet backward grad_n");
  require_same_shape(cache.heads.shape(), Shape{2 * kIterations, h, w}, "menet backward cache");

  // d tanh: dE/dt = 1 and dN/dt = 1, then (1 - t^2).
  Tensor<T> grad_heads(2 * kIterations, h, w);
  const std::size_t n = kIterations * h * w;
  for (std::size_t i = 0; i < n; ++i) {
    const T te = cache.heads[i];
    const T tn = cache.heads[n + i];
    grad_heads[i] = grad_e.maps[i] * (T{1} - te * te);
    grad_heads[n + i] = grad_n.maps[i] * (T{1} - tn * tn);
  }
  const auto gh = detail::Planes<T>::from_tensor(grad_heads);

  MENetParams<T> grads;
  ConvLayer<T> head_grads(2 * kIterations, 64);
  detail::conv_planes_weight_grad(gh, 0, f, 3 * kFeatureWidth, head_grads);
  const std::size_t half = head_grads.weight.size() / 2;
  std::copy(head_grads.weight.begin(), head_grads.weight.begin() + static_cast<std::ptrdiff_t>(half),
            grads.head_e.weight.begin());
  std::copy(head_grads.weight.begin() + static_cast<std::ptrdiff_t>(half), head_grads.weight.end(),
            grads.head_n.weight.begin());
  std::copy(head_grads.bias.begin(), head_grads.bias.begin() + kIterations, grads.head_e.bias.begin());
  std::copy(head_grads.bias.begin() + kIterations, head_grads.bias.end(), grads.head_n.bias.begin());

  // Gradients w.r.t. the stacked feature planes. Block k (conv k+1's output)
  // is complete once every consumer to its right has been processed.
  detail::Planes<T> df(detail::kFeatureChannels, h, w);
  detail::conv_planes_input_grad(gh, 0, detail::fused_heads(params), df, 3 * kFeatureWidth, false);

  auto relu_mask = [&](std::size_t block) {
    for (std::size_t c = block * kFeatureWidth; c < (block + 1) * kFeatureWidth; ++c) {
      T* g = df.plane(c);
      const T* a = f.plane(c);
      for (std::size_t i = 0; i < df.stride(); ++i) {
        g[i] = a[i] > T{0} ? g[i] : T{0};
      }
    }
  };

  struct Step {
    const ConvLayer<T>* layer;
    ConvLayer<T>* grad;
    std::size_t out_block;
    std::size_t in_first;
  };
  const std::array<Step, 4> steps = {{
      {&params.conv5, &grads.conv5, 4, 2 * kFeatureWidth},
      {&params.conv4, &grads.conv4, 3, kFeatureWidth},
      {&params.conv3, &grads.conv3, 2, 0},
      {&params.conv2, &grads.conv2, 1, 0},
  }};
  for (const auto& s : steps) {
    relu_mask(s.out_block);
    const std::size_t g_first = s.out_block * kFeatureWidth;
    detail::conv_planes_weight_grad(df, g_first, f, s.in_first, *s.grad);
    detail::conv_planes_input_grad(df, g_first, *s.layer, df, s.in_first, true);
  }
  relu_mask(0);
  detail::conv_planes_weight_grad(df, 0, cache.image, 0, grads.conv1);
  return grads;
}

}  // namespace darklighter
