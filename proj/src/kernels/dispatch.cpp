#include "ebip/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace ebip::simd {

namespace {

constexpr KernelTable kScalar{"scalar", &detail::dot_scalar,
                              &detail::axpy_scalar,
                              &detail::gemm_accumulate_scalar};

#if defined(EBIP_HAVE_AVX2_KERNELS)
constexpr KernelTable kAvx2{"avx2", &detail::dot_avx2, &detail::axpy_avx2,
                            &detail::gemm_accumulate_avx2};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

#if defined(EBIP_HAVE_NEON_KERNELS)
constexpr KernelTable kNeon{"neon", &detail::dot_neon, &detail::axpy_neon,
                            &detail::gemm_accumulate_neon};
#endif

const KernelTable* best_available() {
  if (const KernelTable* t = avx2_kernels()) return t;
  if (const KernelTable* t = neon_kernels()) return t;
  return &kScalar;
}

const KernelTable* lookup(std::string_view name) {
  if (name == "auto") return best_available();
  if (name == "scalar") return &kScalar;
  if (name == "avx2") return avx2_kernels();
  if (name == "neon") return neon_kernels();
  return nullptr;
}

const KernelTable* initial_selection() {
  if (const char* env = std::getenv("EBIP_SIMD")) {
    if (const KernelTable* t = lookup(env)) return t;
  }
  return best_available();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_selection()};
  return slot;
}

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if defined(EBIP_HAVE_AVX2_KERNELS)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(EBIP_HAVE_NEON_KERNELS)
  return &kNeon;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() {
  return *active_slot().load(std::memory_order_acquire);
}

bool select_kernels(std::string_view name) {
  const KernelTable* t = lookup(name);
  if (t == nullptr) return false;
  active_slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace ebip::simd
