#include "kernels_impl.hpp"

namespace ebip::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_accumulate_scalar(const double* a, const double* p, double* c,
                            std::size_t rows, std::size_t inner,
                            std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    double* cj = c + j * rows;
    const double* pj = p + j * inner;
    for (std::size_t k = 0; k < inner; ++k) {
      const double s = pj[k];
      if (s == 0.0) continue;
      const double* ak = a + k * rows;
      for (std::size_t i = 0; i < rows; ++i) cj[i] += s * ak[i];
    }
  }
}

}  // namespace ebip::simd::detail
