#include "mtnews/lof.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mtnews/common.h"

namespace mtnews {
namespace {

struct Neighborhood {
  double k_distance = 0.0;
  // Indices into the sorted order.
  std::vector<std::size_t> members;
};

// Walks outward from sorted position `s`, taking the nearer side first.
Neighborhood neighborhood_of(const std::vector<double>& sorted, std::size_t s, std::size_t k) {
  const std::size_t n = sorted.size();
  const double x = sorted[s];
  std::size_t left = s;       // next candidate is left - 1
  std::size_t right = s + 1;  // next candidate is right
  double kdist = 0.0;
  for (std::size_t taken = 0; taken < k; ++taken) {
    const bool has_left = left > 0;
    const bool has_right = right < n;
    const double dl = has_left ? std::abs(x - sorted[left - 1]) : 0.0;
    const double dr = has_right ? std::abs(x - sorted[right]) : 0.0;
    if (has_left && (!has_right || dl <= dr)) {
      kdist = dl;
      --left;
    } else {
      kdist = dr;
      ++right;
    }
  }
  // Extend over ties at the k-distance.
  while (left > 0 && std::abs(x - sorted[left - 1]) <= kdist) --left;
  while (right < n && std::abs(x - sorted[right]) <= kdist) ++right;

  Neighborhood nb;
  nb.k_distance = kdist;
  nb.members.reserve(right - left - 1);
  for (std::size_t i = left; i < right; ++i) {
    if (i != s) nb.members.push_back(i);
  }
  return nb;
}

}  // namespace

std::vector<double> lof_scores(std::span<const double> values, std::size_t k) {
  const std::size_t n = values.size();
  if (n < 2) throw DomainError("lof_scores: need at least two points");
  if (k == 0) throw DomainError("lof_scores: k must be positive");
  k = std::min(k, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = values[order[i]];

  std::vector<Neighborhood> hoods(n);
  for (std::size_t s = 0; s < n; ++s) hoods[s] = neighborhood_of(sorted, s, k);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> lrd(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (hoods[s].k_distance == 0.0) {
      lrd[s] = kInf;
      continue;
    }
    double reach_sum = 0.0;
    for (std::size_t o : hoods[s].members) {
      reach_sum += std::max(hoods[o].k_distance, std::abs(sorted[s] - sorted[o]));
    }
    lrd[s] = static_cast<double>(hoods[s].members.size()) / reach_sum;
  }

  std::vector<double> scores(n);
  for (std::size_t s = 0; s < n; ++s) {
    double ratio_sum = 0.0;
    for (std::size_t o : hoods[s].members) {
      if (std::isinf(lrd[o]) && std::isinf(lrd[s])) {
        ratio_sum += 1.0;
      } else {
        ratio_sum += lrd[o] / lrd[s];
      }
    }
    scores[order[s]] = ratio_sum / static_cast<double>(hoods[s].members.size());
  }
  return scores;
}

}  // namespace mtnews
