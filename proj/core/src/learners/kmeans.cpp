#include "aed/learners/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aed/detmath.hpp"
#include "aed/error.hpp"

namespace aed {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t Codebook::nearest(std::span<const double> x) const {
  require(x.size() == dim(), Errc::dimension_mismatch, "codebook dimension mismatch");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Codebook kmeans_fit(const Matrix& X, std::size_t k, std::uint64_t seed,
                    const KmeansParams& params) {
  if (k == 0) fail(Errc::config, "k-means needs k >= 1");
  if (X.size() < k)
    fail(Errc::config, "k-means needs at least k points (" + std::to_string(X.size()) + " < " +
                           std::to_string(k) + ")");
  const std::size_t n = X.size();
  const std::size_t dim = X.front().size();
  for (const auto& x : X)
    require(x.size() == dim, Errc::dimension_mismatch, "k-means input rows differ in size");

  detmath::Rng rng(seed);
  Codebook cb;
  cb.centroids.reserve(k);
  cb.centroids.push_back(X[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(X[i], cb.centroids[0]);
  while (cb.centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (total <= 0.0)
      fail(Errc::config, "k-means: fewer than k distinct points");
    double target = rng.uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] <= 0.0) --pick;  // guard against rounding at the tail
    cb.centroids.push_back(X[pick]);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(X[i], cb.centroids.back()));
  }

  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(X[i], cb.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = best;
      dist[i] = best_d;
    }

    Matrix sums(k, Vector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += X[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      const auto far = static_cast<std::size_t>(
          std::max_element(dist.begin(), dist.end()) - dist.begin());
      const std::size_t donor = assign[far];
      --counts[donor];
      for (std::size_t d = 0; d < dim; ++d) sums[donor][d] -= X[far][d];
      sums[c] = X[far];
      counts[c] = 1;
      assign[far] = c;
      dist[far] = 0.0;
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double moved = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = sums[c][d] / static_cast<double>(counts[c]);
        const double delta = v - cb.centroids[c][d];
        moved += delta * delta;
        cb.centroids[c][d] = v;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    if (shift < params.tolerance) break;
  }
  return cb;
}

}  // namespace aed
