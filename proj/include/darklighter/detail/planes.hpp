#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <vector>

#include "darklighter/tensor.hpp"

namespace darklighter::detail {

inline constexpr std::size_t kPlaneAlign = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kPlaneAlign}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kPlaneAlign}); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

/// Zero-bordered channel planes laid out so that a 3x3 same-padding
/// convolution becomes nine contiguous shifted reads.
///
/// Each plane is (height + 2) rows of `pitch` values (width + 2 rounded up to
/// 16) with the image at rows 1..height, columns 1..width. Position
/// q = y * pitch + x of the "flat" output grid reads its 3x3 neighbourhood at
/// offsets q + dy * pitch + dx from plane(c). Flat positions with x >= width
/// land on border cells; kernels compute them and callers clear them
/// afterwards. interior(c) is 64-byte aligned for float.
template <typename T>
class Planes {
 public:
  Planes() = default;
  Planes(std::size_t channels, std::size_t height, std::size_t width)
      : channels_(channels),
        height_(height),
        width_(width),
        pitch_(round_up(width + 2, kLanes)),
        stride_(round_up((height + 2) * pitch_ + 2, kLanes)),
        lead_((kLanes - (pitch_ + 1) % kLanes) % kLanes),
        buf_(lead_ + channels * stride_ + 4 * kLanes, T{0}) {}

  static Planes from_tensor(const Tensor<T>& t) {
    Planes p(t.channels(), t.height(), t.width());
    p.load(t, 0);
    return p;
  }

  /// Writes t's channels into planes [first, first + t.channels()).
  void load(const Tensor<T>& t, std::size_t first) {
    for (std::size_t c = 0; c < t.channels(); ++c) {
      T* dst = interior(first + c);
      const T* src = t.plane(c);
      for (std::size_t y = 0; y < height_; ++y) {
        std::copy(src + y * width_, src + (y + 1) * width_, dst + y * pitch_);
      }
    }
  }

  Tensor<T> to_tensor(std::size_t first, std::size_t count) const {
    Tensor<T> t(count, height_, width_);
    copy_to(t, first);
    return t;
  }
  Tensor<T> to_tensor() const { return to_tensor(0, channels_); }

  /// Copies planes [first, first + t.channels()) into t (same height/width).
  void copy_to(Tensor<T>& t, std::size_t first) const {
    for (std::size_t c = 0; c < t.channels(); ++c) {
      const T* src = interior(first + c);
      T* dst = t.plane(c);
      for (std::size_t y = 0; y < height_; ++y) {
        std::copy(src + y * pitch_, src + y * pitch_ + width_, dst + y * width_);
      }
    }
  }

  bool matches(std::size_t channels, std::size_t height, std::size_t width) const {
    return channels_ == channels && height_ == height && width_ == width;
  }

  /// Zeroes the border cells a flat-grid kernel wrote into.
  void clear_margins(std::size_t first, std::size_t count) {
    for (std::size_t c = first; c < first + count; ++c) {
      T* row = interior(c);
      for (std::size_t y = 0; y < height_; ++y) {
        std::fill(row + y * pitch_ + width_, row + (y + 1) * pitch_, T{0});
      }
    }
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pitch() const { return pitch_; }
  std::size_t stride() const { return stride_; }
  /// Number of flat output positions covering every interior pixel.
  std::size_t flat_count() const { return height_ * pitch_; }

  T* plane(std::size_t c) { return buf_.data() + lead_ + c * stride_; }
  const T* plane(std::size_t c) const { return buf_.data() + lead_ + c * stride_; }
  T* interior(std::size_t c) { return plane(c) + pitch_ + 1; }
  const T* interior(std::size_t c) const { return plane(c) + pitch_ + 1; }

 private:
  static constexpr std::size_t kLanes = kPlaneAlign / sizeof(float);
  static std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t pitch_ = kLanes;
  std::size_t stride_ = 0;
  std::size_t lead_ = 0;
  std::vector<T, AlignedAllocator<T>> buf_;
};

}  // namespace darklighter::detail
