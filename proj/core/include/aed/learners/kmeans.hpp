#pragma once

#include <cstdint>
#include <span>

#include "aed/types.hpp"

namespace aed {

struct Codebook {
  Matrix centroids;

  std::size_t size() const { return centroids.size(); }
  std::size_t dim() const { return centroids.empty() ? 0 : centroids.front().size(); }
  /// Index of the nearest centroid by Euclidean distance (lowest index on ties).
  std::size_t nearest(std::span<const double> x) const;
};

struct KmeansParams {
  int max_iterations = 100;
  double tolerance = 1e-6;  // stop when no centroid moves further than this
};

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are
/// re-seeded with the point farthest from its assigned centroid.
/// Throws Error{config} when |X| < k or X has fewer than k distinct points.
Codebook kmeans_fit(const Matrix& X, std::size_t k, std::uint64_t seed,
                    const KmeansParams& params = {});

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace aed
