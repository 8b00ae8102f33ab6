#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "ebip/kernels.hpp"

using namespace ebip::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

std::vector<const KernelTable*> variants() {
  std::vector<const KernelTable*> out;
  if (const auto* k = avx2_kernels()) out.push_back(k);
  if (const auto* k = neon_kernels()) out.push_back(k);
  return out;
}

double tolerance(std::size_t terms) { return 1e-14 * static_cast<double>(terms + 1); }

}  // namespace

TEST(Kernels, ScalarIsAlwaysAvailable) {
  EXPECT_EQ(scalar_kernels().name, "scalar");
  EXPECT_TRUE(select_kernels("scalar"));
  EXPECT_EQ(active_kernels().name, "scalar");
  EXPECT_TRUE(select_kernels("auto"));
  EXPECT_FALSE(select_kernels("sse9"));
}

TEST(Kernels, DotMatchesScalarAcrossTails) {
  for (const KernelTable* k : variants()) {
    for (std::size_t n = 0; n < 70; ++n) {
      const auto a = random_vec(n, n);
      const auto b = random_vec(n, n + 100);
      const double ref = scalar_kernels().dot(a.data(), b.data(), n);
      EXPECT_NEAR(k->dot(a.data(), b.data(), n), ref, tolerance(n)) << k->name << " n=" << n;
    }
  }
}

TEST(Kernels, AxpyMatchesScalarAcrossTails) {
  for (const KernelTable* k : variants()) {
    for (std::size_t n = 0; n < 70; ++n) {
      const auto x = random_vec(n, n);
      auto y1 = random_vec(n, n + 7);
      auto y2 = y1;
      scalar_kernels().axpy(-0.37, x.data(), y1.data(), n);
      k->axpy(-0.37, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y2[i], y1[i], 1e-15) << k->name;
    }
  }
}

TEST(Kernels, GemmMatchesScalarAcrossTileRemainders) {
  for (const KernelTable* k : variants()) {
    for (std::size_t rows : {1u, 3u, 8u, 9u, 17u, 33u}) {
      for (std::size_t inner : {1u, 2u, 5u, 16u}) {
        for (std::size_t cols : {1u, 3u, 4u, 7u, 12u}) {
          const auto a = random_vec(rows * inner, rows);
          const auto p = random_vec(inner * cols, inner);
          auto c1 = random_vec(rows * cols, cols);
          auto c2 = c1;
          scalar_kernels().gemm_accumulate(a.data(), p.data(), c1.data(), rows, inner, cols);
          k->gemm_accumulate(a.data(), p.data(), c2.data(), rows, inner, cols);
          for (std::size_t i = 0; i < c1.size(); ++i) {
            ASSERT_NEAR(c2[i], c1[i], tolerance(inner))
                << k->name << " " << rows << "x" << inner << "x" << cols;
          }
        }
      }
    }
  }
}

TEST(Kernels, ScalarGemmMatchesNaiveProduct) {
  const std::size_t r = 5, m = 4, c = 3;
  const auto a = random_vec(r * m, 1);
  const auto p = random_vec(m * c, 2);
  std::vector<double> out(r * c, 1.0);
  scalar_kernels().gemm_accumulate(a.data(), p.data(), out.data(), r, m, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double s = 1.0;
      for (std::size_t t = 0; t < m; ++t) s += a[i + t * r] * p[t + j * m];
      EXPECT_NEAR(out[i + j * r], s, 1e-14);
    }
}
