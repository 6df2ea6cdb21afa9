#include "aed/learners/kernels.hpp"

#include <cmath>

#include "aed/error.hpp"
#include "aed/learners/kmeans.hpp"

namespace aed {

double chi2_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    fail(Errc::dimension_mismatch, "chi2 distance: dimensions differ (" +
                                       std::to_string(u.size()) + " vs " +
                                       std::to_string(v.size()) + ")");
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0.0 || v[i] < 0.0) fail(Errc::invalid_argument, "chi2 distance: negative entry");
    const double diff = u[i] - v[i];
    d += diff * diff / (u[i] + v[i] + 1e-12);
  }
  return 0.5 * d;
}

double combined_kernel(const ChannelPair& a, const ChannelPair& b, double a_phi,
                       double a_varphi) {
  if (!(a_phi > 0.0) || !(a_varphi > 0.0))
    fail(Errc::invalid_argument, "combined kernel: channel means must be positive");
  return std::exp(-(chi2_distance(a.phi, b.phi) / a_phi +
                    chi2_distance(a.varphi, b.varphi) / a_varphi));
}

KernelSpec KernelSpec::rbf(double gamma) {
  KernelSpec k;
  k.kind = KernelKind::rbf;
  k.gamma = gamma;
  return k;
}

KernelSpec KernelSpec::chi2(double a) {
  KernelSpec k;
  k.kind = KernelKind::chi2;
  k.a_phi = a;
  return k;
}

KernelSpec KernelSpec::combined(double a_phi, double a_varphi, std::size_t split) {
  KernelSpec k;
  k.kind = KernelKind::combined;
  k.a_phi = a_phi;
  k.a_varphi = a_varphi;
  k.split = split;
  return k;
}

void KernelSpec::validate() const {
  switch (kind) {
    case KernelKind::rbf:
      require(gamma > 0.0, Errc::invalid_argument, "rbf kernel needs gamma > 0");
      break;
    case KernelKind::chi2:
      require(a_phi > 0.0, Errc::invalid_argument, "chi2 kernel needs A > 0");
      break;
    case KernelKind::combined:
      require(a_phi > 0.0 && a_varphi > 0.0, Errc::invalid_argument,
              "combined kernel needs positive channel means");
      break;
  }
}

double KernelSpec::operator()(std::span<const double> x, std::span<const double> y) const {
  switch (kind) {
    case KernelKind::rbf:
      require(x.size() == y.size(), Errc::dimension_mismatch, "rbf kernel: dimensions differ");
      return std::exp(-gamma * squared_distance(x, y));
    case KernelKind::chi2:
      return std::exp(-chi2_distance(x, y) / a_phi);
    case KernelKind::combined:
      require(x.size() == y.size() && split <= x.size(), Errc::dimension_mismatch,
              "combined kernel: dimensions differ");
      return combined_kernel({x.first(split), x.subspan(split)}, {y.first(split), y.subspan(split)},
                             a_phi, a_varphi);
  }
  return 0.0;
}

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::chi2: return "chi2";
    case KernelKind::combined: return "combined";
  }
  return "unknown";
}

double mean_chi2_distance(const Matrix& rows, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const std::span<const double> a(rows[i]);
      const std::span<const double> b(rows[j]);
      sum += chi2_distance(a.subspan(begin, end - begin), b.subspan(begin, end - begin));
      ++pairs;
    }
  return pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
}

Matrix gram_matrix(const Matrix& rows, const KernelSpec& kernel) {
  kernel.validate();
  const std::size_t n = rows.size();
  Matrix g(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    g[i][i] = kernel(rows[i], rows[i]);
    for (std::size_t j = i + 1; j < n; ++j) g[i][j] = g[j][i] = kernel(rows[i], rows[j]);
  }
  return g;
}

}  // namespace aed
