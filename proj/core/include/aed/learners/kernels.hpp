#pragma once

#include <span>

#include "aed/types.hpp"

namespace aed {

/// D(u, v) = 1/2 sum (u_i - v_i)^2 / (u_i + v_i + 1e-12). Inputs must be
/// non-negative and of equal length.
double chi2_distance(std::span<const double> u, std::span<const double> v);

/// Two-channel descriptor used by the combined kernel.
struct ChannelPair {
  std::span<const double> phi;     // bank-of-regressors channel
  std::span<const double> varphi;  // histogram-of-discriminative-words channel
};

/// K = exp(-(D(phi_i, phi_j) / a_phi + D(varphi_i, varphi_j) / a_varphi)).
double combined_kernel(const ChannelPair& a, const ChannelPair& b, double a_phi,
                       double a_varphi);

enum class KernelKind { rbf, chi2, combined };

struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double gamma = 1.0;        // rbf
  double a_phi = 1.0;        // chi2 bandwidth, or the first combined channel
  double a_varphi = 1.0;     // second combined channel
  std::size_t split = 0;     // combined: length of the first channel

  static KernelSpec rbf(double gamma);
  static KernelSpec chi2(double a);
  static KernelSpec combined(double a_phi, double a_varphi, std::size_t split);

  double operator()(std::span<const double> x, std::span<const double> y) const;
  void validate() const;
};

const char* to_string(KernelKind kind);

/// Mean chi2 distance over all unordered pairs of `rows` restricted to
/// columns [begin, end). Used to set the data-determined bandwidth A.
double mean_chi2_distance(const Matrix& rows, std::size_t begin, std::size_t end);

/// Full Gram matrix of `rows` under `kernel`.
Matrix gram_matrix(const Matrix& rows, const KernelSpec& kernel);

}  // namespace aed
