#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "darklighter/detail/conv_kernels.hpp"
#include "darklighter/detail/planes.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>

namespace darklighter::detail::winograd {

// F(2x2, 3x3): each 2x2 output tile is A^T [(G g G^T) .* (B^T d B)] A for its
// 4x4 input patch d. Tiles are processed in chunks of whole tile rows; within a
// chunk the transformed data is laid out [xi][channel][tile] so the 16
// elementwise products become small matrix products vectorized over tiles.

inline constexpr std::size_t kLanes = 16;
inline constexpr std::size_t kBlock = 4;  // output channels per register tile
inline constexpr int kVecs = 5;
inline constexpr std::size_t kChunkTiles = 128;

using Buffer = std::vector<float, AlignedAllocator<float>>;

inline bool applicable(std::size_t height, std::size_t width) {
  return height >= 2 && width >= 2 && height % 2 == 0 && width % 2 == 0;
}

/// Packs G g G^T as u[xi][block][c][kBlock], zero-padded to whole blocks.
inline void transform_weights(const float* weight, std::size_t out_channels, std::size_t in_channels, Buffer& u) {
  const std::size_t blocks = (out_channels + kBlock - 1) / kBlock;
  u.assign(16 * blocks * in_channels * kBlock, 0.0f);
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t c = 0; c < in_channels; ++c) {
      const float* g = weight + (o * in_channels + c) * 9;
      float gg[4][3];
      for (std::size_t k = 0; k < 3; ++k) {
        const float g0 = g[k];
        const float g1 = g[3 + k];
        const float g2 = g[6 + k];
        gg[0][k] = g0;
        gg[1][k] = 0.5f * (g0 + g1 + g2);
        gg[2][k] = 0.5f * (g0 - g1 + g2);
        gg[3][k] = g2;
      }
      for (std::size_t i = 0; i < 4; ++i) {
        const float r0 = gg[i][0];
        const float r1 = gg[i][1];
        const float r2 = gg[i][2];
        const float row[4] = {r0, 0.5f * (r0 + r1 + r2), 0.5f * (r0 - r1 + r2), r2};
        for (std::size_t j = 0; j < 4; ++j) {
          const std::size_t xi = 4 * i + j;
          u[((xi * blocks + o / kBlock) * in_channels + c) * kBlock + o % kBlock] = row[j];
        }
      }
    }
  }
}

struct Geometry {
  std::size_t pitch;
  std::size_t width;
  std::size_t tiles_wide;   // width / 2
  std::size_t tiles_pitch;  // tiles_wide rounded up to whole vectors
};

inline void transform_input(const float* in, std::size_t in_stride, std::size_t channels, const Geometry& g,
                            std::size_t ty0, std::size_t rows, float* v, std::size_t tiles) {
  const __m512i even = _mm512_set_epi32(30, 28, 26, 24, 22, 20, 18, 16, 14, 12, 10, 8, 6, 4, 2, 0);
  const __m512i odd = _mm512_add_epi32(even, _mm512_set1_epi32(1));
  for (std::size_t c = 0; c < channels; ++c) {
    const float* plane = in + c * in_stride;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t tx0 = 0; tx0 < g.tiles_wide; tx0 += kLanes) {
        __m512 d[4][4];
        for (std::size_t i = 0; i < 4; ++i) {
          const float* row = plane + (2 * (ty0 + r) + i) * g.pitch + 2 * tx0;
          const __m512 a = _mm512_loadu_ps(row);
          const __m512 b = _mm512_loadu_ps(row + 16);
          const __m512 a2 = _mm512_loadu_ps(row + 2);
          const __m512 b2 = _mm512_loadu_ps(row + 18);
          d[i][0] = _mm512_permutex2var_ps(a, even, b);
          d[i][1] = _mm512_permutex2var_ps(a, odd, b);
          d[i][2] = _mm512_permutex2var_ps(a2, even, b2);
          d[i][3] = _mm512_permutex2var_ps(a2, odd, b2);
        }
        __m512 t[4][4];
        for (std::size_t j = 0; j < 4; ++j) {
          t[0][j] = _mm512_sub_ps(d[0][j], d[2][j]);
          t[1][j] = _mm512_add_ps(d[1][j], d[2][j]);
          t[2][j] = _mm512_sub_ps(d[2][j], d[1][j]);
          t[3][j] = _mm512_sub_ps(d[1][j], d[3][j]);
        }
        float* dst = v + c * tiles + r * g.tiles_pitch + tx0;
        const std::size_t xi_stride = channels * tiles;
        for (std::size_t i = 0; i < 4; ++i) {
          _mm512_store_ps(dst + (4 * i + 0) * xi_stride, _mm512_sub_ps(t[i][0], t[i][2]));
          _mm512_store_ps(dst + (4 * i + 1) * xi_stride, _mm512_add_ps(t[i][1], t[i][2]));
          _mm512_store_ps(dst + (4 * i + 2) * xi_stride, _mm512_sub_ps(t[i][2], t[i][1]));
          _mm512_store_ps(dst + (4 * i + 3) * xi_stride, _mm512_sub_ps(t[i][1], t[i][3]));
        }
      }
    }
  }
}

template <int QV>
inline void gemm_tile(const float* v, std::size_t tiles, std::size_t channels, const float* u, float* m) {
  __m512 acc[kBlock][QV];
#pragma GCC unroll 16
  for (std::size_t o = 0; o < kBlock; ++o) {
#pragma GCC unroll 16
    for (int q = 0; q < QV; ++q) acc[o][q] = _mm512_setzero_ps();
  }
  for (std::size_t c = 0; c < channels; ++c) {
    __m512 x[QV];
#pragma GCC unroll 16
    for (int q = 0; q < QV; ++q) x[q] = _mm512_load_ps(v + c * tiles + q * kLanes);
#pragma GCC unroll 16
    for (std::size_t o = 0; o < kBlock; ++o) {
      const __m512 w = _mm512_set1_ps(u[c * kBlock + o]);
#pragma GCC unroll 16
      for (int q = 0; q < QV; ++q) acc[o][q] = _mm512_fmadd_ps(w, x[q], acc[o][q]);
    }
  }
#pragma GCC unroll 16
  for (std::size_t o = 0; o < kBlock; ++o) {
#pragma GCC unroll 16
    for (int q = 0; q < QV; ++q) _mm512_store_ps(m + o * tiles + q * kLanes, acc[o][q]);
  }
}

/// m[xi][o][t] = sum_c u[xi][o][c] * v[xi][c][t], o padded to whole blocks.
inline void multiply(const float* v, const float* u, float* m, std::size_t channels, std::size_t blocks,
                     std::size_t tiles) {
  constexpr std::size_t step = kVecs * kLanes;
  for (std::size_t xi = 0; xi < 16; ++xi) {
    const float* vx = v + xi * channels * tiles;
    const float* ux = u + xi * blocks * channels * kBlock;
    float* mx = m + xi * blocks * kBlock * tiles;
    // Every output block reuses the same tile columns while they sit in L1.
    std::size_t t0 = 0;
    for (; t0 + step <= tiles; t0 += step) {
      for (std::size_t b = 0; b < blocks; ++b) {
        gemm_tile<kVecs>(vx + t0, tiles, channels, ux + b * channels * kBlock, mx + b * kBlock * tiles + t0);
      }
    }
    const std::size_t rest = (tiles - t0) / kLanes;
    for (std::size_t b = 0; b < blocks && rest != 0; ++b) {
      const float* ub = ux + b * channels * kBlock;
      float* mb = mx + b * kBlock * tiles + t0;
      switch (rest) {
        case 1: gemm_tile<1>(vx + t0, tiles, channels, ub, mb); break;
        case 2: gemm_tile<2>(vx + t0, tiles, channels, ub, mb); break;
        case 3: gemm_tile<3>(vx + t0, tiles, channels, ub, mb); break;
        default: gemm_tile<4>(vx + t0, tiles, channels, ub, mb); break;
      }
    }
  }
}

inline void transform_output(const float* m, std::size_t out_channels, std::size_t blocks, std::size_t tiles,
                             const Geometry& g, std::size_t ty0, std::size_t rows, const float* bias, float* out,
                             std::size_t out_stride, FlatConvOptions opt) {
  const __m512i lo_idx = _mm512_set_epi32(23, 7, 22, 6, 21, 5, 20, 4, 19, 3, 18, 2, 17, 1, 16, 0);
  const __m512i hi_idx = _mm512_add_epi32(lo_idx, _mm512_set1_epi32(8));
  const __m512 zero = _mm512_setzero_ps();
  const std::size_t xi_stride = blocks * kBlock * tiles;
  for (std::size_t o = 0; o < out_channels; ++o) {
    const __m512 b = _mm512_set1_ps(bias && !opt.accumulate ? bias[o] : 0.0f);
    const float* mo = m + o * tiles;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t tx0 = 0; tx0 < g.tiles_wide; tx0 += kLanes) {
        const float* src = mo + r * g.tiles_pitch + tx0;
        __m512 s[2][4];
        for (std::size_t j = 0; j < 4; ++j) {
          const __m512 m0 = _mm512_load_ps(src + (0 + j) * xi_stride);
          const __m512 m1 = _mm512_load_ps(src + (4 + j) * xi_stride);
          const __m512 m2 = _mm512_load_ps(src + (8 + j) * xi_stride);
          const __m512 m3 = _mm512_load_ps(src + (12 + j) * xi_stride);
          s[0][j] = _mm512_add_ps(_mm512_add_ps(m0, m1), m2);
          s[1][j] = _mm512_sub_ps(_mm512_sub_ps(m1, m2), m3);
        }
        const std::size_t valid = std::min<std::size_t>(2 * kLanes, g.width - 2 * tx0);
        const __mmask16 mask_lo = valid >= kLanes ? __mmask16(0xFFFF) : static_cast<__mmask16>((1u << valid) - 1u);
        const __mmask16 mask_hi = valid >= 2 * kLanes ? __mmask16(0xFFFF)
                                  : valid > kLanes   ? static_cast<__mmask16>((1u << (valid - kLanes)) - 1u)
                                                     : __mmask16(0);
        for (std::size_t i = 0; i < 2; ++i) {
          __m512 y0 = _mm512_add_ps(_mm512_add_ps(s[i][0], s[i][1]), s[i][2]);
          __m512 y1 = _mm512_sub_ps(_mm512_sub_ps(s[i][1], s[i][2]), s[i][3]);
          float* dst = out + o * out_stride + (2 * (ty0 + r) + i) * g.pitch + 2 * tx0;
          __m512 lo = _mm512_add_ps(_mm512_permutex2var_ps(y0, lo_idx, y1), b);
          __m512 hi = _mm512_add_ps(_mm512_permutex2var_ps(y0, hi_idx, y1), b);
          if (opt.accumulate) {
            lo = _mm512_add_ps(lo, _mm512_maskz_loadu_ps(mask_lo, dst));
            hi = _mm512_add_ps(hi, _mm512_maskz_loadu_ps(mask_hi, dst + kLanes));
          }
          if (opt.relu) {
            lo = _mm512_max_ps(lo, zero);
            hi = _mm512_max_ps(hi, zero);
          }
          _mm512_mask_storeu_ps(dst, mask_lo, lo);
          _mm512_mask_storeu_ps(dst + kLanes, mask_hi, hi);
        }
      }
    }
  }
}

/// Same contract as conv3x3_flat over Planes geometry (`in` points at plane 0,
/// `out` at the interior of the first output plane, both with `pitch`), but
/// only interior pixels are written.
inline void conv3x3(const float* in, std::size_t in_stride, std::size_t in_channels, const float* weight,
                    const float* bias, std::size_t out_channels, float* out, std::size_t out_stride,
                    std::size_t pitch, std::size_t height, std::size_t width, FlatConvOptions opt) {
  thread_local Buffer u;
  thread_local Buffer v;
  thread_local Buffer m;
  transform_weights(weight, out_channels, in_channels, u);
  const std::size_t blocks = (out_channels + kBlock - 1) / kBlock;
  Geometry g{pitch, width, width / 2, (width / 2 + kLanes - 1) / kLanes * kLanes};
  const std::size_t tiles_high = height / 2;
  const std::size_t rows_per_chunk = std::max<std::size_t>(1, kChunkTiles / g.tiles_pitch);
  const std::size_t max_tiles = rows_per_chunk * g.tiles_pitch;
  if (v.size() < 16 * in_channels * max_tiles) v.resize(16 * in_channels * max_tiles);
  if (m.size() < 16 * blocks * kBlock * max_tiles) m.resize(16 * blocks * kBlock * max_tiles);
  for (std::size_t ty0 = 0; ty0 < tiles_high; ty0 += rows_per_chunk) {
    const std::size_t rows = std::min(rows_per_chunk, tiles_high - ty0);
    const std::size_t tiles = rows * g.tiles_pitch;
    transform_input(in, in_stride, in_channels, g, ty0, rows, v.data(), tiles);
    multiply(v.data(), u.data(), m.data(), in_channels, blocks, tiles);
    transform_output(m.data(), out_channels, blocks, tiles, g, ty0, rows, bias, out, out_stride, opt);
  }
}

}  // namespace darklighter::detail::winograd

#endif  // __AVX512F__
