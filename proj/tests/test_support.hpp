#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "darklighter/conv.hpp"
#include "darklighter/image_io.hpp"
#include "darklighter/menet.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter::testing {

template <typename T>
Tensor<T> random_tensor(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed, double lo = -1.0,
                        double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(c, h, w);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
ConvLayer<T> random_layer(std::size_t out, std::size_t in, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  ConvLayer<T> l(out, in);
  for (auto& v : l.weight) v = static_cast<T>(dist(rng));
  for (auto& v : l.bias) v = static_cast<T>(dist(rng));
  return l;
}

template <typename T>
MENetParams<T> random_params(std::uint64_t seed, double scale) {
  MENetParams<T> p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto* l : p.layers()) {
    for (auto& v : l->weight) v = static_cast<T>(dist(rng));
    for (auto& v : l->bias) v = static_cast<T>(dist(rng));
  }
  return p;
}

/// Direct zero-padded 3x3 convolution by nested loops, in double.
template <typename T>
Tensor<double> naive_conv(const Tensor<T>& in, const ConvLayer<T>& layer) {
  const auto h = static_cast<long>(in.height());
  const auto w = static_cast<long>(in.width());
  Tensor<double> out(layer.out_channels, in.height(), in.width());
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = static_cast<double>(layer.bias[o]);
        for (std::size_t c = 0; c < layer.in_channels; ++c) {
          for (long dy = 0; dy < 3; ++dy) {
            for (long dx = 0; dx < 3; ++dx) {
              const long yy = y + dy - 1;
              const long xx = x + dx - 1;
              if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
              acc += static_cast<double>(layer.w(o, c, static_cast<std::size_t>(dy), static_cast<std::size_t>(dx))) *
                     static_cast<double>(in(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)));
            }
          }
        }
        out(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
      }
    }
  }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("darklighter_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Procedural scene: a colour gradient with a few soft discs, raised to
/// `gamma` so the result looks underexposed.
inline ImageTensor synthetic_dark_image(std::size_t size, std::uint64_t seed, double gamma = 2.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double base[3][3];
  for (auto& ch : base) {
    for (auto& v : ch) v = 0.2 + 0.7 * u(rng);
  }
  struct Disc {
    double cx, cy, r, col[3];
  };
  Disc discs[4];
  for (auto& d : discs) d = {u(rng), u(rng), 0.08 + 0.2 * u(rng), {u(rng), u(rng), u(rng)}};
  ImageTensor img(3, size, size);
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) * inv;
      const double fy = (static_cast<double>(y) + 0.5) * inv;
      for (std::size_t c = 0; c < 3; ++c) {
        double v = base[c][0] * (1.0 - fx) + base[c][1] * fx * (1.0 - fy) + base[c][2] * fx * fy;
        v = std::min(v, 1.0);
        for (const auto& d : discs) {
          const double r2 = ((fx - d.cx) * (fx - d.cx) + (fy - d.cy) * (fy - d.cy)) / (d.r * d.r);
          const double a = std::exp(-2.0 * r2);
          v = v * (1.0 - a) + d.col[c] * a;
        }
        img(c, y, x) = static_cast<float>(std::pow(v, gamma));
      }
    }
  }
  return img;
}

/// Writes `count` synthetic dark PNGs into a fresh directory.
inline std::filesystem::path synthetic_dataset(const std::string& name, std::size_t count, std::size_t size,
                                               std::uint64_t seed = 0) {
  const auto dir = scratch_dir(name);
  for (std::size_t i = 0; i < count; ++i) {
    char file[32];
    std::snprintf(file, sizeof file, "img%03zu.png", i);
    save_png(synthetic_dark_image(size, seed * 1000 + i), dir / file);
  }
  return dir;
}

}  // namespace darklighter::testing
