#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <type_traits>
#include <vector>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace darklighter::detail {

// Kernels over the flat padded layout of Planes<T>. Weights are [out][in][3][3]
// row-major. Every output element is accumulated in a fixed order (bias or
// prior value, then input channel ascending, then tap ascending), so results do
// not depend on blocking or thread schedule.

inline std::array<std::size_t, 9> tap_offsets(std::size_t pitch) {
  return {0, 1, 2, pitch, pitch + 1, pitch + 2, 2 * pitch, 2 * pitch + 1, 2 * pitch + 2};
}

struct FlatConvOptions {
  bool accumulate = false;  // start from the existing output instead of the bias
  bool relu = false;        // clamp at zero when storing
};

/// out[o][q] = bias[o] + sum_{c,d} w[o][c][d] * in[c][q + tap(d)] for q < count.
template <typename T>
void conv3x3_flat_generic(const T* in, std::size_t in_stride, std::size_t in_channels, const T* weight,
                          const T* bias, std::size_t out_channels, T* out, std::size_t out_stride,
                          std::size_t pitch, std::size_t count, FlatConvOptions opt) {
  const auto off = tap_offsets(pitch);
  for (std::size_t o = 0; o < out_channels; ++o) {
    T* dst = out + o * out_stride;
    if (!opt.accumulate) {
      std::fill(dst, dst + count, bias ? bias[o] : T{0});
    }
    for (std::size_t c = 0; c < in_channels; ++c) {
      const T* w = weight + (o * in_channels + c) * 9;
      for (std::size_t d = 0; d < 9; ++d) {
        const T wd = w[d];
        const T* src = in + c * in_stride + off[d];
        for (std::size_t q = 0; q < count; ++q) {
          dst[q] += wd * src[q];
        }
      }
    }
    if (opt.relu) {
      for (std::size_t q = 0; q < count; ++q) {
        dst[q] = std::max(dst[q], T{0});
      }
    }
  }
}

/// grad_w[o][c][d] += sum_q grad[o][q] * in[c][q + tap(d)]; grad_b[o] += sum_q grad[o][q].
/// Flat positions outside the image must hold zero in `grad`.
template <typename T>
void conv3x3_weight_grad_generic(const T* grad, std::size_t grad_stride, std::size_t out_channels, const T* in,
                                 std::size_t in_stride, std::size_t in_channels, std::size_t pitch,
                                 std::size_t count, T* grad_weight, T* grad_bias) {
  const auto off = tap_offsets(pitch);
  for (std::size_t o = 0; o < out_channels; ++o) {
    const T* g = grad + o * grad_stride;
    for (std::size_t c = 0; c < in_channels; ++c) {
      for (std::size_t d = 0; d < 9; ++d) {
        const T* src = in + c * in_stride + off[d];
        T acc{0};
        for (std::size_t q = 0; q < count; ++q) {
          acc += g[q] * src[q];
        }
        grad_weight[(o * in_channels + c) * 9 + d] += acc;
      }
    }
    if (grad_bias) {
      T acc{0};
      for (std::size_t q = 0; q < count; ++q) {
        acc += g[q];
      }
      grad_bias[o] += acc;
    }
  }
}

#if defined(__AVX512F__)

namespace avx512 {

inline constexpr int kOutBlock = 4;
inline constexpr int kVecs = 5;
inline constexpr std::size_t kLanes = 16;

// One register tile: kOutBlock output channels x QV vectors of 16 positions.
template <int QV, bool Masked>
inline void conv_tile(const float* in, std::size_t in_stride, std::size_t in_channels, const float* packed,
                      const std::array<std::size_t, 9>& off, const float* bias, float* const* outs, int valid_out,
                      std::size_t q0, __mmask16 mask, FlatConvOptions opt) {
  __m512 acc[kOutBlock][QV];
#pragma GCC unroll 16
  for (int o = 0; o < kOutBlock; ++o) {
#pragma GCC unroll 16
    for (int v = 0; v < QV; ++v) {
      if (o >= valid_out) {
        acc[o][v] = _mm512_setzero_ps();
      } else if (opt.accumulate) {
        const float* p = outs[o] + q0 + v * kLanes;
        acc[o][v] = Masked ? _mm512_maskz_loadu_ps(mask, p) : _mm512_loadu_ps(p);
      } else {
        acc[o][v] = _mm512_set1_ps(bias ? bias[o] : 0.0f);
      }
    }
  }
  for (std::size_t c = 0; c < in_channels; ++c) {
    const float* src = in + c * in_stride + q0;
    const float* w = packed + c * 9 * kOutBlock;
#pragma GCC unroll 9
    for (int d = 0; d < 9; ++d) {
      const float* s = src + off[d];
      __m512 x[QV];
#pragma GCC unroll 16
      for (int v = 0; v < QV; ++v) {
        x[v] = Masked ? _mm512_maskz_loadu_ps(mask, s + v * kLanes) : _mm512_loadu_ps(s + v * kLanes);
      }
#pragma GCC unroll 16
      for (int o = 0; o < kOutBlock; ++o) {
        const __m512 wv = _mm512_set1_ps(w[d * kOutBlock + o]);
#pragma GCC unroll 16
        for (int v = 0; v < QV; ++v) {
          acc[o][v] = _mm512_fmadd_ps(wv, x[v], acc[o][v]);
        }
      }
    }
  }
  const __m512 zero = _mm512_setzero_ps();
  for (int o = 0; o < valid_out; ++o) {
    for (int v = 0; v < QV; ++v) {
      __m512 r = opt.relu ? _mm512_max_ps(acc[o][v], zero) : acc[o][v];
      float* p = outs[o] + q0 + v * kLanes;
      if constexpr (Masked) {
        _mm512_mask_storeu_ps(p, mask, r);
      } else {
        _mm512_storeu_ps(p, r);
      }
    }
  }
}

inline void conv3x3_flat(const float* in, std::size_t in_stride, std::size_t in_channels, const float* weight,
                         const float* bias, std::size_t out_channels, float* out, std::size_t out_stride,
                         std::size_t pitch, std::size_t count, FlatConvOptions opt) {
  const auto off = tap_offsets(pitch);
  const std::size_t blocks = (out_channels + kOutBlock - 1) / kOutBlock;
  // packed[block][c][tap][o_in_block]
  std::vector<float> packed(blocks * in_channels * 9 * kOutBlock, 0.0f);
  for (std::size_t o = 0; o < out_channels; ++o) {
    const std::size_t b = o / kOutBlock;
    const std::size_t lane = o % kOutBlock;
    for (std::size_t c = 0; c < in_channels; ++c) {
      for (std::size_t d = 0; d < 9; ++d) {
        packed[((b * in_channels + c) * 9 + d) * kOutBlock + lane] = weight[(o * in_channels + c) * 9 + d];
      }
    }
  }

  constexpr std::size_t tile = kVecs * kLanes;
  // Position chunks small enough that the input window stays in L2 while every
  // output block sweeps it.
  constexpr std::size_t chunk = tile * 16;
  const std::size_t full_end = count / tile * tile;
  for (std::size_t c0 = 0; c0 < count; c0 += chunk) {
    const std::size_t c1 = std::min(count, c0 + chunk);
    for (std::size_t b = 0; b < blocks; ++b) {
      const int valid = static_cast<int>(std::min<std::size_t>(kOutBlock, out_channels - b * kOutBlock));
      float* outs[kOutBlock] = {};
      for (int o = 0; o < valid; ++o) {
        outs[o] = out + (b * kOutBlock + o) * out_stride;
      }
      const float* wb = packed.data() + b * in_channels * 9 * kOutBlock;
      const float* bb = bias ? bias + b * kOutBlock : nullptr;
      std::size_t q0 = c0;
      for (; q0 + tile <= std::min(c1, full_end); q0 += tile) {
        conv_tile<kVecs, false>(in, in_stride, in_channels, wb, off, bb, outs, valid, q0, 0xFFFF, opt);
      }
      for (; q0 < c1; q0 += kLanes) {
        const std::size_t n = std::min(kLanes, c1 - q0);
        const __mmask16 mask = static_cast<__mmask16>((1u << n) - 1u);
        conv_tile<1, true>(in, in_stride, in_channels, wb, off, bb, outs, valid, q0, mask, opt);
      }
    }
  }
}

inline constexpr int kGradOutBlock = 3;

inline void conv3x3_weight_grad(const float* grad, std::size_t grad_stride, std::size_t out_channels,
                                const float* in, std::size_t in_stride, std::size_t in_channels, std::size_t pitch,
                                std::size_t count, float* grad_weight, float* grad_bias) {
  const auto off = tap_offsets(pitch);
  constexpr std::size_t chunk = 4096;
  for (std::size_t q_begin = 0; q_begin < count; q_begin += chunk) {
    const std::size_t q_end = std::min(count, q_begin + chunk);
    for (std::size_t c = 0; c < in_channels; ++c) {
      const float* src = in + c * in_stride;
      for (std::size_t o0 = 0; o0 < out_channels; o0 += kGradOutBlock) {
        const int valid = static_cast<int>(std::min<std::size_t>(kGradOutBlock, out_channels - o0));
        const float* g[kGradOutBlock];
        for (int k = 0; k < kGradOutBlock; ++k) {
          g[k] = grad + (o0 + static_cast<std::size_t>(std::min(k, valid - 1))) * grad_stride;
        }
        __m512 acc[kGradOutBlock][9];
        for (auto& row : acc) {
          for (auto& a : row) {
            a = _mm512_setzero_ps();
          }
        }
        for (std::size_t q = q_begin; q < q_end; q += kLanes) {
          const std::size_t n = std::min(kLanes, q_end - q);
          const __mmask16 mask = static_cast<__mmask16>((1u << n) - 1u);
          __m512 gv[kGradOutBlock];
          for (int k = 0; k < kGradOutBlock; ++k) {
            gv[k] = _mm512_maskz_loadu_ps(mask, g[k] + q);
          }
          for (int d = 0; d < 9; ++d) {
            const __m512 x = _mm512_maskz_loadu_ps(mask, src + q + off[d]);
            for (int k = 0; k < kGradOutBlock; ++k) {
              acc[k][d] = _mm512_fmadd_ps(gv[k], x, acc[k][d]);
            }
          }
        }
        for (int k = 0; k < valid; ++k) {
          float* gw = grad_weight + ((o0 + k) * in_channels + c) * 9;
          for (int d = 0; d < 9; ++d) {
            gw[d] += _mm512_reduce_add_ps(acc[k][d]);
          }
        }
      }
    }
  }
  if (grad_bias) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      const float* g = grad + o * grad_stride;
      __m512 acc = _mm512_setzero_ps();
      for (std::size_t q = 0; q < count; q += kLanes) {
        const std::size_t n = std::min(kLanes, count - q);
        acc = _mm512_add_ps(acc, _mm512_maskz_loadu_ps(static_cast<__mmask16>((1u << n) - 1u), g + q));
      }
      grad_bias[o] += _mm512_reduce_add_ps(acc);
    }
  }
}

}  // namespace avx512

#endif  // __AVX512F__

template <typename T>
void conv3x3_flat(const T* in, std::size_t in_stride, std::size_t in_channels, const T* weight, const T* bias,
                  std::size_t out_channels, T* out, std::size_t out_stride, std::size_t pitch, std::size_t count,
                  FlatConvOptions opt) {
#if defined(__AVX512F__)
  if constexpr (std::is_same_v<T, float>) {
    avx512::conv3x3_flat(in, in_stride, in_channels, weight, bias, out_channels, out, out_stride, pitch, count,
                         opt);
    return;
  }
#endif
  conv3x3_flat_generic(in, in_stride, in_channels, weight, bias, out_channels, out, out_stride, pitch, count, opt);
}

template <typename T>
void conv3x3_weight_grad(const T* grad, std::size_t grad_stride, std::size_t out_channels, const T* in,
                         std::size_t in_stride, std::size_t in_channels, std::size_t pitch, std::size_t count,
                         T* grad_weight, T* grad_bias) {
#if defined(__AVX512F__)
  if constexpr (std::is_same_v<T, float>) {
    avx512::conv3x3_weight_grad(grad, grad_stride, out_channels, in, in_stride, in_channels, pitch, count,
                                grad_weight, grad_bias);
    return;
  }
#endif
  conv3x3_weight_grad_generic(grad, grad_stride, out_channels, in, in_stride, in_channels, pitch, count,
                              grad_weight, grad_bias);
}

/// Weights of the adjoint convolution: transposed channels, flipped taps.
template <typename T>
std::vector<T> adjoint_weights(const T* weight, std::size_t out_channels, std::size_t in_channels) {
  std::vector<T> adj(out_channels * in_channels * 9);
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t c = 0; c < in_channels; ++c) {
      for (std::size_t d = 0; d < 9; ++d) {
        adj[(c * out_channels + o) * 9 + (8 - d)] = weight[(o * in_channels + c) * 9 + d];
      }
    }
  }
  return adj;
}

}  // namespace darklighter::detail
