#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ebip/basis.hpp"
#include "ebip/core.hpp"

namespace ebip::fixtures {

inline ModalityLayout small_layout() {
  return ModalityLayout({{"obs", 2, Role::observed}, {"ctl", 1, Role::controlled}});
}

// Smooth demo: row d is sin(2 pi (phi + 0.1 d) * freq) * amp + offset plus noise.
inline Demonstration smooth_demo(const ModalityLayout& layout, int duration, double amp,
                                 double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  Demonstration demo;
  demo.layout = layout;
  demo.samples.resize(layout.total_dofs(), duration);
  for (int t = 0; t < duration; ++t) {
    const double phi = static_cast<double>(t + 1) / duration;
    for (int d = 0; d < layout.total_dofs(); ++d) {
      demo.samples(d, t) = amp * std::sin(2.0 * M_PI * (phi + 0.1 * d)) + 0.2 * d * phi +
                           noise * n01(gen);
    }
  }
  return demo;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

}  // namespace ebip::fixtures
