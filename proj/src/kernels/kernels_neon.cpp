#include "kernels_impl.hpp"

#if defined(EBIP_HAVE_NEON_KERNELS)

#include <arm_neon.h>

namespace ebip::simd::detail {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_n_f64(vld1q_f64(y + i), vld1q_f64(x + i), alpha));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_accumulate_neon(const double* a, const double* p, double* c,
                          std::size_t rows, std::size_t inner,
                          std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double* pj = p + j * inner;
    double* cj = c + j * rows;
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      float64x2_t lo = vdupq_n_f64(0.0);
      float64x2_t hi = vdupq_n_f64(0.0);
      for (std::size_t k = 0; k < inner; ++k) {
        const double* ak = a + k * rows + i;
        lo = vfmaq_n_f64(lo, vld1q_f64(ak), pj[k]);
        hi = vfmaq_n_f64(hi, vld1q_f64(ak + 2), pj[k]);
      }
      vst1q_f64(cj + i, vaddq_f64(vld1q_f64(cj + i), lo));
      vst1q_f64(cj + i + 2, vaddq_f64(vld1q_f64(cj + i + 2), hi));
    }
    for (; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += a[k * rows + i] * pj[k];
      cj[i] += s;
    }
  }
}

}  // namespace ebip::simd::detail

#endif
