#pragma once

// Dense inner loops used by the ensemble filters. Each kernel has a portable
// scalar reference and, where the target supports it, an AVX2/FMA or NEON
// variant. The variant is picked once at startup from the CPU features; set
// EBIP_SIMD=scalar|avx2|neon to override.

#include <cstddef>
#include <span>
#include <string_view>

namespace ebip::simd {

struct KernelTable {
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C += A * P with A rows x inner, P inner x cols, C rows x cols, all
  // column-major and densely packed.
  void (*gemm_accumulate)(const double* a, const double* p, double* c,
                          std::size_t rows, std::size_t inner,
                          std::size_t cols);
};

const KernelTable& scalar_kernels();
/// nullptr unless compiled in and supported by the running CPU.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

const KernelTable& active_kernels();
/// Accepts "auto", "scalar", "avx2" or "neon". Returns false (and leaves the
/// selection unchanged) when the requested variant is unavailable.
bool select_kernels(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace ebip::simd
