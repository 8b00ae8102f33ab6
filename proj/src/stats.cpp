#include "ebip/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebip/error.hpp"

namespace ebip {

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw config_error("empty_sample", "Mann-Whitney U needs two non-empty samples");
  }
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::vector<double> ranks = midranks(pooled);

  MannWhitneyResult out;
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + na, 0.0);
  out.u = rank_sum_a - static_cast<double>(na * (na + 1)) / 2.0;
  const double center = static_cast<double>(na * nb) / 2.0;

  if (std::all_of(pooled.begin(), pooled.end(), [&](double v) { return v == pooled[0]; })) {
    out.degenerate = true;
    out.p = 1.0;
    return out;
  }

  if (n <= 20) {
    // Enumerate every way to label na of the pooled ranks as sample a.
    out.exact = true;
    const double observed = std::abs(out.u - center);
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + na, true);
    std::size_t total = 0;
    std::size_t extreme = 0;
    // prev_permutation over a sorted-descending bool mask visits all subsets.
    do {
      double rs = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) rs += ranks[i];
      const double u = rs - static_cast<double>(na * (na + 1)) / 2.0;
      if (std::abs(u - center) >= observed - 1e-9) ++extreme;
      ++total;
    } while (std::prev_permutation(pick.begin(), pick.end()));
    out.p = std::min(1.0, static_cast<double>(extreme) / static_cast<double>(total));
    return out;
  }

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double nn = static_cast<double>(n);
  const double variance = static_cast<double>(na * nb) / 12.0 *
                          ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (variance <= 0.0) {
    out.degenerate = true;
    out.p = 1.0;
    return out;
  }
  const double diff = std::abs(out.u - center);
  const double z = std::max(0.0, diff - 0.5) / std::sqrt(variance);
  out.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw config_error("bad_fit", "line fit needs at least two paired points");
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace ebip
