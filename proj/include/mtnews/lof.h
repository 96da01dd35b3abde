#ifndef MTNEWS_LOF_H_
#define MTNEWS_LOF_H_

#include <span>
#include <vector>

namespace mtnews {

// Local outlier factor of every point of a 1-D sample under the absolute
// difference metric. The neighbourhood of a point holds every other point
// within its k-distance, so ties at the k-distance are all included. The
// effective k is min(k, n - 1).
//
// A point whose k-distance is 0 (it has at least k exact duplicates) has
// infinite local reachability density; a ratio of two infinite densities is
// taken as 1. Scores near 1 mark inliers.
//
// Throws DomainError for fewer than two points or k == 0.
std::vector<double> lof_scores(std::span<const double> values, std::size_t k);

}  // namespace mtnews

#endif  // MTNEWS_LOF_H_
