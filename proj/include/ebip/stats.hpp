#pragma once

#include <span>
#include <vector>

namespace ebip {

struct MannWhitneyResult {
  double u = 0.0;  // U statistic of sample a
  double p = 1.0;  // two-sided
  bool exact = false;
  bool degenerate = false;  // every value identical
};

/// Two-sided Mann-Whitney U test. Exact enumeration over all label
/// assignments when n_a + n_b <= 20, otherwise the normal approximation with
/// tie and continuity corrections.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Average ranks (1-based, ties share the mean rank).
std::vector<double> midranks(std::span<const double> values);

double mean(std::span<const double> v);
double sample_std(std::span<const double> v);
double median(std::vector<double> v);

/// Least-squares slope and intercept of y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace ebip
