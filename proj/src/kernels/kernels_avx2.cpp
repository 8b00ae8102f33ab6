// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "kernels_impl.hpp"

#include <immintrin.h>

namespace ebip::simd::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Register tile: 8 rows x 4 output columns, eight accumulators. Each A load
// is reused across the four columns of P.
void gemm_accumulate_avx2(const double* a, const double* p, double* c,
                          std::size_t rows, std::size_t inner,
                          std::size_t cols) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    const double* p0 = p + (j + 0) * inner;
    const double* p1 = p + (j + 1) * inner;
    const double* p2 = p + (j + 2) * inner;
    const double* p3 = p + (j + 3) * inner;
    double* c0 = c + (j + 0) * rows;
    double* c1 = c + (j + 1) * rows;
    double* c2 = c + (j + 2) * rows;
    double* c3 = c + (j + 3) * rows;

    std::size_t i = 0;
    for (; i + 8 <= rows; i += 8) {
      __m256d a00 = _mm256_setzero_pd(), a01 = _mm256_setzero_pd();
      __m256d a10 = _mm256_setzero_pd(), a11 = _mm256_setzero_pd();
      __m256d a20 = _mm256_setzero_pd(), a21 = _mm256_setzero_pd();
      __m256d a30 = _mm256_setzero_pd(), a31 = _mm256_setzero_pd();
      for (std::size_t k = 0; k < inner; ++k) {
        const double* ak = a + k * rows + i;
        const __m256d lo = _mm256_loadu_pd(ak);
        const __m256d hi = _mm256_loadu_pd(ak + 4);
        __m256d s = _mm256_broadcast_sd(p0 + k);
        a00 = _mm256_fmadd_pd(lo, s, a00);
        a01 = _mm256_fmadd_pd(hi, s, a01);
        s = _mm256_broadcast_sd(p1 + k);
        a10 = _mm256_fmadd_pd(lo, s, a10);
        a11 = _mm256_fmadd_pd(hi, s, a11);
        s = _mm256_broadcast_sd(p2 + k);
        a20 = _mm256_fmadd_pd(lo, s, a20);
        a21 = _mm256_fmadd_pd(hi, s, a21);
        s = _mm256_broadcast_sd(p3 + k);
        a30 = _mm256_fmadd_pd(lo, s, a30);
        a31 = _mm256_fmadd_pd(hi, s, a31);
      }
      _mm256_storeu_pd(c0 + i, _mm256_add_pd(_mm256_loadu_pd(c0 + i), a00));
      _mm256_storeu_pd(c0 + i + 4, _mm256_add_pd(_mm256_loadu_pd(c0 + i + 4), a01));
      _mm256_storeu_pd(c1 + i, _mm256_add_pd(_mm256_loadu_pd(c1 + i), a10));
      _mm256_storeu_pd(c1 + i + 4, _mm256_add_pd(_mm256_loadu_pd(c1 + i + 4), a11));
      _mm256_storeu_pd(c2 + i, _mm256_add_pd(_mm256_loadu_pd(c2 + i), a20));
      _mm256_storeu_pd(c2 + i + 4, _mm256_add_pd(_mm256_loadu_pd(c2 + i + 4), a21));
      _mm256_storeu_pd(c3 + i, _mm256_add_pd(_mm256_loadu_pd(c3 + i), a30));
      _mm256_storeu_pd(c3 + i + 4, _mm256_add_pd(_mm256_loadu_pd(c3 + i + 4), a31));
    }
    for (; i < rows; ++i) {
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t k = 0; k < inner; ++k) {
        const double av = a[k * rows + i];
        s0 += av * p0[k];
        s1 += av * p1[k];
        s2 += av * p2[k];
        s3 += av * p3[k];
      }
      c0[i] += s0;
      c1[i] += s1;
      c2[i] += s2;
      c3[i] += s3;
    }
  }
  // Remaining columns: one column at a time, 4-row vectors.
  for (; j < cols; ++j) {
    const double* pj = p + j * inner;
    double* cj = c + j * rows;
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t k = 0; k < inner; ++k) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k * rows + i),
                              _mm256_broadcast_sd(pj + k), acc);
      }
      _mm256_storeu_pd(cj + i, _mm256_add_pd(_mm256_loadu_pd(cj + i), acc));
    }
    for (; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += a[k * rows + i] * pj[k];
      cj[i] += s;
    }
  }
}

}  // namespace ebip::simd::detail
