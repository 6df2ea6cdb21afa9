#include "aed/detmath.hpp"

#include <cmath>
#include <limits>

namespace aed::detmath {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559005768;
constexpr double kHalfPi = 1.570796326794896619231321691639751442;
constexpr double kLn2 = 0.693147180559945309417232121458176568;
constexpr double kLn10 = 2.302585092994045684017991454684364208;

// Taylor polynomials on |x| <= pi/4; truncation error < 1e-17.
double sin_kernel(double x) {
  const double x2 = x * x;
  double term = x;
  double sum = x;
  for (int k = 1; k <= 9; ++k) {
    term *= -x2 / static_cast<double>((2 * k) * (2 * k + 1));
    sum += term;
  }
  return sum;
}

double cos_kernel(double x) {
  const double x2 = x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 9; ++k) {
    term *= -x2 / static_cast<double>((2 * k - 1) * (2 * k));
    sum += term;
  }
  return sum;
}

// Reduces x to r in [-pi/4, pi/4] and quadrant q with x = r + q*pi/2 (mod 2pi).
void reduce(double x, double& r, int& quadrant) {
  double y = x - kTwoPi * std::nearbyint(x / kTwoPi);
  const double q = std::nearbyint(y / kHalfPi);
  r = y - q * kHalfPi;
  quadrant = static_cast<int>(q) & 3;
}

}  // namespace

double sin(double x) {
  double r;
  int q;
  reduce(x, r, q);
  switch (q) {
    case 0: return sin_kernel(r);
    case 1: return cos_kernel(r);
    case 2: return -sin_kernel(r);
    default: return -cos_kernel(r);
  }
}

double cos(double x) {
  double r;
  int q;
  reduce(x, r, q);
  switch (q) {
    case 0: return cos_kernel(r);
    case 1: return -sin_kernel(r);
    case 2: return -cos_kernel(r);
    default: return sin_kernel(r);
  }
}

double exp(double x) {
  if (x > 709.0) return std::numeric_limits<double>::infinity();
  if (x < -745.0) return 0.0;
  const double k = std::nearbyint(x / kLn2);
  const double r = x - k * kLn2;
  double term = 1.0;
  double sum = 1.0;
  for (int n = 1; n <= 18; ++n) {
    term *= r / n;
    sum += term;
  }
  return std::ldexp(sum, static_cast<int>(k));
}

double log(double x) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  int e = 0;
  double m = std::frexp(x, &e);  // m in [0.5, 1)
  if (m < 0.70710678118654752440) {
    m *= 2.0;
    --e;
  }
  const double s = (m - 1.0) / (m + 1.0);
  const double s2 = s * s;
  double power = s;
  double sum = 0.0;
  for (int k = 0; k <= 14; ++k) {
    sum += power / (2 * k + 1);
    power *= s2;
  }
  return 2.0 * sum + e * kLn2;
}

double db_to_gain(double db) { return exp(db / 20.0 * kLn10); }

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * log(u1));
  spare_ = radius * sin(kTwoPi * u2);
  has_spare_ = true;
  return radius * cos(kTwoPi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace aed::detmath
