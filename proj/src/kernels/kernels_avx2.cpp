#include <immintrin.h>

#include "kernels_impl.hpp"

// AVX2+FMA variants, 4 doubles per lane, scalar tail. Lane accumulators are
// reduced left-to-right so results are reproducible run to run.

namespace dspboard::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_squares_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double sum_squared_diff_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void weight_update_avx2(double* w, const double* x, std::size_t n, double g,
                        double leak) {
  const __m256d gv = _mm256_set1_pd(g);
  const __m256d keepv = _mm256_set1_pd(1.0 - leak);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wv = _mm256_mul_pd(keepv, _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(w + i, _mm256_fmadd_pd(gv, _mm256_loadu_pd(x + i), wv));
  }
  const double keep = 1.0 - leak;
  for (; i < n; ++i) w[i] = keep * w[i] + g * x[i];
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops{dot_avx2, sum_squares_avx2, sum_squared_diff_avx2,
                       weight_update_avx2};
  return ops;
}

}  // namespace dspboard::kernels::detail
