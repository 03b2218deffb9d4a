// AVX2 kernel variants. Same evaluation order as the scalar reference:
// one 4-lane vector accumulator, lanes summed left to right, sequential tail.
// No FMA -- mul and add stay separate so results match the scalar backend
// bit for bit.

#include "mb/kernels.hpp"

#if defined(__x86_64__)

#include <immintrin.h>

namespace mb::kernels::detail {

__attribute__((target("avx2"))) double dot_avx2(const double* a,
                                                const double* b,
                                                std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double lane[4];
  _mm256_storeu_pd(lane, acc);
  double s = ((lane[0] + lane[1]) + lane[2]) + lane[3];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

__attribute__((target("avx2"))) double sq_dist_avx2(const double* a,
                                                    const double* b,
                                                    std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double lane[4];
  _mm256_storeu_pd(lane, acc);
  double s = ((lane[0] + lane[1]) + lane[2]) + lane[3];
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

__attribute__((target("avx2"))) void axpy_avx2(double alpha, const double* x,
                                               double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

__attribute__((target("avx2"))) void diff_axpy_avx2(double alpha,
                                                    const double* a,
                                                    const double* b, double* y,
                                                    std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(
        y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, d)));
  }
  for (; i < n; ++i) y[i] += alpha * (a[i] - b[i]);
}

}  // namespace mb::kernels::detail

#endif  // __x86_64__
