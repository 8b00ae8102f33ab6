#pragma once

#include <cstddef>

namespace ebip::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void gemm_accumulate_scalar(const double* a, const double* p, double* c,
                            std::size_t rows, std::size_t inner,
                            std::size_t cols);

#if defined(__x86_64__) || defined(_M_X64)
#define EBIP_HAVE_AVX2_KERNELS 1
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void gemm_accumulate_avx2(const double* a, const double* p, double* c,
                          std::size_t rows, std::size_t inner,
                          std::size_t cols);
#endif

#if defined(__aarch64__) && defined(__ARM_NEON)
#define EBIP_HAVE_NEON_KERNELS 1
double dot_neon(const double* a, const double* b, std::size_t n);
void axpy_neon(double alpha, const double* x, double* y, std::size_t n);
void gemm_accumulate_neon(const double* a, const double* p, double* c,
                          std::size_t rows, std::size_t inner,
                          std::size_t cols);
#endif

}  // namespace ebip::simd::detail
