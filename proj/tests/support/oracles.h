// Independent reference implementations used only by tests.
#ifndef MTNEWS_TESTS_ORACLES_H_
#define MTNEWS_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mtnews::testing {

// Local outlier factor straight from the four definitions: k-distance,
// k-neighbourhood, reachability distance, local reachability density.
// O(n^2 log n), no sorting tricks.
inline std::vector<double> brute_force_lof(const std::vector<double>& x, std::size_t k) {
  const std::size_t n = x.size();
  k = std::min(k, n - 1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto dist = [&](std::size_t p, std::size_t q) { return std::abs(x[p] - x[q]); };

  std::vector<double> k_distance(n);
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<double> d;
    for (std::size_t q = 0; q < n; ++q) {
      if (q != p) d.push_back(dist(p, q));
    }
    std::sort(d.begin(), d.end());
    k_distance[p] = d[k - 1];
    for (std::size_t q = 0; q < n; ++q) {
      if (q != p && dist(p, q) <= k_distance[p]) neighbors[p].push_back(q);
    }
  }
  std::vector<double> lrd(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (k_distance[p] == 0.0) {
      lrd[p] = kInf;
      continue;
    }
    double sum = 0.0;
    for (std::size_t o : neighbors[p]) sum += std::max(k_distance[o], dist(p, o));
    lrd[p] = static_cast<double>(neighbors[p].size()) / sum;
  }
  std::vector<double> lof(n);
  for (std::size_t p = 0; p < n; ++p) {
    double sum = 0.0;
    for (std::size_t o : neighbors[p]) {
      sum += (std::isinf(lrd[o]) && std::isinf(lrd[p])) ? 1.0 : lrd[o] / lrd[p];
    }
    lof[p] = sum / static_cast<double>(neighbors[p].size());
  }
  return lof;
}

// Two-tailed p of Student's t by composite Simpson integration of the
// density over [|t|, |t| + span] plus a far tail that is negligible for the
// fixtures used.
inline double t_two_tailed_p_by_quadrature(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  const double a = 0.0;
  const double b = std::abs(t);
  const int steps = 200000;
  const double h = (b - a) / steps;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < steps; ++i) s += pdf(a + i * h) * (i % 2 ? 4.0 : 2.0);
  const double central = s * h / 3.0;  // P(0 <= T <= |t|)
  return 1.0 - 2.0 * central;
}

}  // namespace mtnews::testing

#endif  // MTNEWS_TESTS_ORACLES_H_
