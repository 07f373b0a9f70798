#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "darklighter/enhancer.hpp"
#include "darklighter/feature_extractor.hpp"
#include "darklighter/menet.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter {

inline constexpr std::size_t kPatchSize = 16;

enum class ColorLossMode {
  literal,       // per-pixel squared channel differences
  channel_mean,  // squared differences of per-channel mean intensities
};

/// Coefficients of the combined objective and the target patch brightness.
struct LossWeights {
  float lambda_col = 1600.0f;
  float lambda_cen = 50.0f;
  float lambda_ill = 10.0f;
  float lambda_sem = 0.001f;
  float lambda_noi = 50.0f;
  float well_lit_level = 0.6f;
  ColorLossMode color_mode = ColorLossMode::literal;
};

/// Per-patch weights w = ln(e + sqrt(j^2 + k^2)), (j, k) the patch offset
/// from the grid centre (half-integers on even grids).
struct SpatialWeightMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline SpatialWeightMap build_weight_map(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw InvalidArgument("build_weight_map: grid must be at least 1x1");
  }
  SpatialWeightMap map{rows, cols, std::vector<float>(rows * cols)};
  const double cr = (static_cast<double>(rows) - 1.0) / 2.0;
  const double cc = (static_cast<double>(cols) - 1.0) / 2.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double j = static_cast<double>(r) - cr;
      const double k = static_cast<double>(c) - cc;
      map.values[r * cols + c] = static_cast<float>(std::log(std::numbers::e + std::sqrt(j * j + k * k)));
    }
  }
  return map;
}

/// Mean intensity (over all channels) of each non-overlapping 16x16 patch.
template <typename T>
struct PatchMeanGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t patch_size = kPatchSize;
  std::vector<T> values;

  T at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::size_t count() const { return values.size(); }
};

/// Remainder rows/columns beyond the last full patch are ignored.
template <typename T>
PatchMeanGrid<T> patch_means(const Tensor<T>& image) {
  if (image.height() < kPatchSize || image.width() < kPatchSize) {
    throw InvalidArgument("patch_means: image " + image.shape().to_string() + " is smaller than one 16x16 patch");
  }
  PatchMeanGrid<T> grid{image.height() / kPatchSize, image.width() / kPatchSize, kPatchSize, {}};
  grid.values.assign(grid.rows * grid.cols, T{0});
  const double norm = 1.0 / static_cast<double>(kPatchSize * kPatchSize * image.channels());
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t q = 0; q < grid.cols; ++q) {
      double sum = 0.0;
      for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t y = r * kPatchSize; y < (r + 1) * kPatchSize; ++y) {
          for (std::size_t x = q * kPatchSize; x < (q + 1) * kPatchSize; ++x) {
            sum += static_cast<double>(image(c, y, x));
          }
        }
      }
      grid.values[r * grid.cols + q] = static_cast<T>(sum * norm);
    }
  }
  return grid;
}

template <typename T>
struct ImageLoss {
  T value{};
  Tensor<T> grad;
};

template <typename T>
struct StackLoss {
  T value{};
  MapStack<T> grad;
};

/// (1/P) * sum_p (w_p * (y_p - l))^2 over the 16x16 patch grid.
template <typename T>
ImageLoss<T> loss_cen(const Tensor<T>& enhanced, const SpatialWeightMap& weights, T level) {
  const auto grid = patch_means(enhanced);
  if (grid.rows != weights.rows || grid.cols != weights.cols) {
    throw ShapeError("loss_cen: weight map " + std::to_string(weights.rows) + "x" + std::to_string(weights.cols) +
                     " does not match patch grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
  const double patches = static_cast<double>(grid.count());
  const double patch_pixels = static_cast<double>(kPatchSize * kPatchSize * enhanced.channels());
  ImageLoss<T> out{T{0}, Tensor<T>(enhanced.shape())};
  double loss = 0.0;
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t q = 0; q < grid.cols; ++q) {
      const double w = weights.at(r, q);
      const double diff = static_cast<double>(grid.at(r, q)) - static_cast<double>(level);
      loss += (w * diff) * (w * diff);
      const T g = static_cast<T>(2.0 * w * w * diff / (patches * patch_pixels));
      for (std::size_t c = 0; c < enhanced.channels(); ++c) {
        for (std::size_t y = r * kPatchSize; y < (r + 1) * kPatchSize; ++y) {
          for (std::size_t x = q * kPatchSize; x < (q + 1) * kPatchSize; ++x) {
            out.grad(c, y, x) = g;
          }
        }
      }
    }
  }
  out.value = static_cast<T>(loss / patches);
  return out;
}

/// (1/I) * sum_i mean_pixels((dx E_i)^2 + (dy E_i)^2), forward differences,
/// zero difference past the last row/column.
template <typename T>
StackLoss<T> loss_ill(const MapStack<T>& e_stack) {
  if (e_stack.iterations() == 0) {
    throw InvalidArgument("loss_ill: empty map stack");
  }
  const std::size_t h = e_stack.height();
  const std::size_t w = e_stack.width();
  const double scale = 1.0 / static_cast<double>(e_stack.iterations() * h * w);
  StackLoss<T> out{T{0}, MapStack<T>(e_stack.iterations(), h, w)};
  double loss = 0.0;
  for (std::size_t i = 0; i < e_stack.iterations(); ++i) {
    const T* e = e_stack.map(i);
    T* g = out.grad.map(i);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t k = y * w + x;
        if (x + 1 < w) {
          const double dx = static_cast<double>(e[k + 1]) - static_cast<double>(e[k]);
          loss += dx * dx;
          const T gd = static_cast<T>(2.0 * dx * scale);
          g[k + 1] += gd;
          g[k] -= gd;
        }
        if (y + 1 < h) {
          const double dy = static_cast<double>(e[k + w]) - static_cast<double>(e[k]);
          loss += dy * dy;
          const T gd = static_cast<T>(2.0 * dy * scale);
          g[k + w] += gd;
          g[k] -= gd;
        }
      }
    }
  }
  out.value = static_cast<T>(loss * scale);
  return out;
}

/// (1/I) * sum_i mean_pixels(N_i^2).
template <typename T>
StackLoss<T> loss_noi(const MapStack<T>& n_stack) {
  if (n_stack.iterations() == 0) {
    throw InvalidArgument("loss_noi: empty map stack");
  }
  const double scale = 1.0 / static_cast<double>(n_stack.maps.size());
  StackLoss<T> out{T{0}, MapStack<T>(n_stack.iterations(), n_stack.height(), n_stack.width())};
  double loss = 0.0;
  for (std::size_t k = 0; k < n_stack.maps.size(); ++k) {
    const double v = static_cast<double>(n_stack.maps[k]);
    loss += v * v;
    out.grad.maps[k] = static_cast<T>(2.0 * v * scale);
  }
  out.value = static_cast<T>(loss * scale);
  return out;
}

/// Squared differences between the (r,g), (r,b), (g,b) channel pairs,
/// normalized by the pixel count.
template <typename T>
ImageLoss<T> loss_col(const Tensor<T>& enhanced, ColorLossMode mode = ColorLossMode::literal) {
  if (enhanced.channels() != 3) {
    throw ShapeError("loss_col: expected 3 channels, got " + enhanced.shape().to_string());
  }
  constexpr std::array<std::array<std::size_t, 2>, 3> pairs = {{{0, 1}, {0, 2}, {1, 2}}};
  const std::size_t pixels = enhanced.plane_size();
  const double inv_pixels = 1.0 / static_cast<double>(pixels);
  ImageLoss<T> out{T{0}, Tensor<T>(enhanced.shape())};
  double loss = 0.0;
  if (mode == ColorLossMode::literal) {
    for (const auto& [m, n] : pairs) {
      const T* a = enhanced.plane(m);
      const T* b = enhanced.plane(n);
      T* ga = out.grad.plane(m);
      T* gb = out.grad.plane(n);
      for (std::size_t k = 0; k < pixels; ++k) {
        const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        loss += d * d;
        const T g = static_cast<T>(2.0 * d * inv_pixels);
        ga[k] += g;
        gb[k] -= g;
      }
    }
    out.value = static_cast<T>(loss * inv_pixels);
    return out;
  }
  std::array<double, 3> mean{};
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t k = 0; k < pixels; ++k) s += static_cast<double>(enhanced.plane(c)[k]);
    mean[c] = s * inv_pixels;
  }
  std::array<double, 3> gmean{};
  for (const auto& [m, n] : pairs) {
    const double d = mean[m] - mean[n];
    loss += d * d;
    gmean[m] += 2.0 * d;
    gmean[n] -= 2.0 * d;
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const T g = static_cast<T>(gmean[c] * inv_pixels);
    std::fill(out.grad.plane(c), out.grad.plane(c) + pixels, g);
  }
  out.value = static_cast<T>(loss);
  return out;
}

/// mean((F(enhanced) - F(original))^2); the gradient flows into `enhanced` only.
template <typename T>
ImageLoss<T> loss_sem(const Tensor<T>& enhanced, const Tensor<T>& original, const FeatureExtractor<T>& fx) {
  if (enhanced.shape() != original.shape()) {
    throw InvalidArgument("loss_sem: image shapes " + enhanced.shape().to_string() + " and " +
                          original.shape().to_string() + " differ");
  }
  FeatureTrace<T> trace;
  const auto fe = fx.features(enhanced, &trace);
  const auto fo = fx.features(original);
  const double scale = 1.0 / static_cast<double>(fe.size());
  Tensor<T> grad_features(fe.shape());
  double loss = 0.0;
  for (std::size_t k = 0; k < fe.size(); ++k) {
    const double d = static_cast<double>(fe[k]) - static_cast<double>(fo[k]);
    loss += d * d;
    grad_features[k] = static_cast<T>(2.0 * d * scale);
  }
  return {static_cast<T>(loss * scale), fx.input_gradient(trace, grad_features)};
}

template <typename T>
struct LossComponents {
  T col{};
  T cen{};
  T ill{};
  T sem{};
  T noi{};
};

/// Weighted objective and its gradients w.r.t. the inputs of the enhancer.
template <typename T>
struct TotalLoss {
  T total{};
  LossComponents<T> parts;
  Tensor<T> grad_final;  // gradient reaching S_I
  MapStack<T> grad_e;
  MapStack<T> grad_n;
};

template <typename T>
T weighted_sum(const LossComponents<T>& p, const LossWeights& w) {
  return static_cast<T>(w.lambda_col) * p.col + static_cast<T>(w.lambda_cen) * p.cen +
         static_cast<T>(w.lambda_ill) * p.ill + static_cast<T>(w.lambda_sem) * p.sem +
         static_cast<T>(w.lambda_noi) * p.noi;
}

/// Colour, lightness and semantic terms act on the unclamped S_I; the
/// smoothness and noise terms act on the maps directly.
template <typename T>
TotalLoss<T> total_loss(const Tensor<T>& s0, const Tensor<T>& final, const MapStack<T>& e_stack,
                        const MapStack<T>& n_stack, const LossWeights& weights, const FeatureExtractor<T>& fx) {
  require_same_shape(final.shape(), s0.shape(), "total_loss");
  const auto wmap = build_weight_map(final.height() / kPatchSize, final.width() / kPatchSize);
  const auto col = loss_col(final, weights.color_mode);
  const auto cen = loss_cen(final, wmap, static_cast<T>(weights.well_lit_level));
  const auto sem = loss_sem(final, s0, fx);
  const auto ill = loss_ill(e_stack);
  const auto noi = loss_noi(n_stack);

  TotalLoss<T> out;
  out.parts = {col.value, cen.value, ill.value, sem.value, noi.value};
  out.total = weighted_sum(out.parts, weights);

  out.grad_final = Tensor<T>(final.shape());
  const T lc = static_cast<T>(weights.lambda_col);
  const T lz = static_cast<T>(weights.lambda_cen);
  const T ls = static_cast<T>(weights.lambda_sem);
  for (std::size_t k = 0; k < final.size(); ++k) {
    out.grad_final[k] = lc * col.grad[k] + lz * cen.grad[k] + ls * sem.grad[k];
  }
  auto chain = enhance_backward(s0, e_stack, n_stack, out.grad_final);
  out.grad_e = std::move(chain.e_stack);
  out.grad_n = std::move(chain.n_stack);
  const T li = static_cast<T>(weights.lambda_ill);
  const T ln = static_cast<T>(weights.lambda_noi);
  for (std::size_t k = 0; k < out.grad_e.maps.size(); ++k) {
    out.grad_e.maps[k] += li * ill.grad.maps[k];
    out.grad_n.maps[k] += ln * noi.grad.maps[k];
  }
  return out;
}

template <typename T>
TotalLoss<T> total_loss(const Tensor<T>& s0, const EnhancementResult<T>& result, const MapStack<T>& e_stack,
                        const MapStack<T>& n_stack, const LossWeights& weights, const FeatureExtractor<T>& fx) {
  return total_loss(s0, result.final, e_stack, n_stack, weights, fx);
}

}  // namespace darklighter
