#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "darklighter/error.hpp"

namespace darklighter {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  std::size_t pixels() const { return height * width; }
  bool operator==(const Shape&) const = default;

  std::string to_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
};

/// Dense channel-major, row-major C x H x W array.
///
/// Image-valued tensors hold intensities in [0,1]; feature maps and gradients
/// are unbounded.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0})
      : shape_{channels, height, width}, data_(channels * height * width, fill) {}
  explicit Tensor(Shape shape, T fill = T{0}) : Tensor(shape.channels, shape.height, shape.width, fill) {}
  Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_.to_string());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return shape_.pixels(); }
  bool empty() const { return data_.empty(); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T* plane(std::size_t c) { return data_.data() + c * plane_size(); }
  const T* plane(std::size_t c) const { return data_.data() + c * plane_size(); }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using ImageTensor = Tensor<float>;

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  std::vector<To> out(t.size());
  std::transform(t.values().begin(), t.values().end(), out.begin(), [](From v) { return static_cast<To>(v); });
  return Tensor<To>(t.shape(), std::move(out));
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape " + a.to_string() + " does not match " + b.to_string());
  }
}

/// Stacks b's channels after a's.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError("concat_channels: spatial mismatch between " + a.shape().to_string() + " and " +
                     b.shape().to_string());
  }
  Tensor<T> out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.values().begin(), a.values().end(), out.data());
  std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
  return out;
}

/// Adjoint of concat_channels: first `at` channels, then the rest.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& t, std::size_t at) {
  if (at > t.channels()) {
    throw ShapeError("split_channels: split point " + std::to_string(at) + " exceeds " + t.shape().to_string());
  }
  Tensor<T> a(at, t.height(), t.width());
  Tensor<T> b(t.channels() - at, t.height(), t.width());
  const auto split = t.values().begin() + static_cast<std::ptrdiff_t>(a.size());
  std::copy(t.values().begin(), split, a.data());
  std::copy(split, t.values().end(), b.data());
  return {std::move(a), std::move(b)};
}

/// Copies channels [first, first + count).
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, std::size_t first, std::size_t count) {
  if (first + count > t.channels()) {
    throw ShapeError("slice_channels: range exceeds " + t.shape().to_string());
  }
  Tensor<T> out(count, t.height(), t.width());
  std::copy(t.plane(first), t.plane(first) + out.size(), out.data());
  return out;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace darklighter
