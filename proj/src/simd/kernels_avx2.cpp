// Compiled with -mavx2 -mfma. Nothing in this file may run before
// dispatch.cpp has confirmed the CPU supports both.
#include "htcc/simd/kernels.hpp"

#include <immintrin.h>

#include <climits>

namespace htcc::simd {
namespace {

double dot_f64_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  lo = _mm_add_pd(lo, hi);
  double acc = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f64_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// madd_epi16 pair sums fit int32 except for the (-32768)^2 * 2 corner, so
// widen every pair sum to int64 before accumulating.
std::int64_t dot_i16_avx2(const std::int16_t* a, const std::int16_t* b, std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const __m256i prod = _mm256_madd_epi16(va, vb);
    const __m256i corner = _mm256_cmpeq_epi32(prod, _mm256_set1_epi32(INT32_MIN));
    // 2^31 wraps to INT32_MIN; a genuine -2^31 pair sum is impossible.
    __m256i lo = _mm256_cvtepi32_epi64(_mm256_castsi256_si128(prod));
    __m256i hi = _mm256_cvtepi32_epi64(_mm256_extracti128_si256(prod, 1));
    const __m256i fix_lo = _mm256_cvtepi32_epi64(_mm256_castsi256_si128(corner));
    const __m256i fix_hi = _mm256_cvtepi32_epi64(_mm256_extracti128_si256(corner, 1));
    const __m256i two32 = _mm256_set1_epi64x(std::int64_t{1} << 32);
    lo = _mm256_add_epi64(lo, _mm256_and_si256(fix_lo, two32));
    hi = _mm256_add_epi64(hi, _mm256_and_si256(fix_hi, two32));
    acc = _mm256_add_epi64(acc, _mm256_add_epi64(lo, hi));
  }
  alignas(32) std::int64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  std::int64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) total += std::int64_t{a[i]} * std::int64_t{b[i]};
  return total;
}

void axpy_i16_avx2(std::int32_t alpha, const std::int16_t* x, std::int32_t* y, std::size_t n) {
  const __m256i va = _mm256_set1_epi32(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i vx =
        _mm256_cvtepi16_epi32(_mm_loadu_si128(reinterpret_cast<const __m128i*>(x + i)));
    __m256i vy = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(y + i));
    vy = _mm256_add_epi32(vy, _mm256_mullo_epi32(va, vx));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(y + i), vy);
  }
  for (; i < n; ++i) y[i] += alpha * std::int32_t{x[i]};
}

}  // namespace

const KernelTable& avx2_kernel_table() {
  static const KernelTable table{Isa::avx2, dot_f64_avx2, axpy_f64_avx2, dot_i16_avx2,
                                 axpy_i16_avx2};
  return table;
}

}  // namespace htcc::simd
