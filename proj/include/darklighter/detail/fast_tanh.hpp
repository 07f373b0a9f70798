#pragma once

#include <cmath>
#include <cstddef>
#include <type_traits>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace darklighter::detail {

// Odd rational minimax fit of tanh on [-7.9053, 7.9053]; beyond that the
// float result rounds to +-1. Max abs error is a few ulp.
inline constexpr float kTanhClamp = 7.90531110763549805f;
inline constexpr float kTanhLinear = 0.0004f;
inline constexpr float kTanhAlpha[7] = {4.89352455891786e-03f, 6.37261928875436e-04f, 1.48572235717979e-05f,
                                        5.12229709037114e-08f, -8.60467152213735e-11f, 2.00018790482477e-13f,
                                        -2.76076847742355e-16f};
inline constexpr float kTanhBeta[4] = {4.89352518554385e-03f, 2.26843463243900e-03f, 1.18534705686654e-04f,
                                       1.19825839466702e-06f};

inline float tanh_rational(float x) {
  const float c = std::fmax(-kTanhClamp, std::fmin(kTanhClamp, x));
  if (std::fabs(x) < kTanhLinear) return x;
  const float x2 = c * c;
  float p = kTanhAlpha[6];
  for (int k = 5; k >= 0; --k) p = std::fma(x2, p, kTanhAlpha[k]);
  float q = kTanhBeta[3];
  for (int k = 2; k >= 0; --k) q = std::fma(x2, q, kTanhBeta[k]);
  return c * p / q;
}

/// In-place tanh. The float path is vectorized; other types use std::tanh.
template <typename T>
void tanh_inplace(T* v, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    std::size_t i = 0;
#if defined(__AVX512F__)
    const __m512 hi = _mm512_set1_ps(kTanhClamp);
    const __m512 lo = _mm512_set1_ps(-kTanhClamp);
    const __m512 lin = _mm512_set1_ps(kTanhLinear);
    for (; i + 16 <= n; i += 16) {
      const __m512 x = _mm512_loadu_ps(v + i);
      const __m512 c = _mm512_max_ps(lo, _mm512_min_ps(hi, x));
      const __m512 x2 = _mm512_mul_ps(c, c);
      __m512 p = _mm512_set1_ps(kTanhAlpha[6]);
      for (int k = 5; k >= 0; --k) p = _mm512_fmadd_ps(x2, p, _mm512_set1_ps(kTanhAlpha[k]));
      __m512 q = _mm512_set1_ps(kTanhBeta[3]);
      for (int k = 2; k >= 0; --k) q = _mm512_fmadd_ps(x2, q, _mm512_set1_ps(kTanhBeta[k]));
      const __m512 r = _mm512_div_ps(_mm512_mul_ps(c, p), q);
      const __mmask16 small = _mm512_cmp_ps_mask(_mm512_abs_ps(x), lin, _CMP_LT_OQ);
      _mm512_storeu_ps(v + i, _mm512_mask_blend_ps(small, r, x));
    }
#endif
    for (; i < n; ++i) v[i] = tanh_rational(v[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
  }
}

}  // namespace darklighter::detail
