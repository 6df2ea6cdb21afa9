#pragma once

// Platform-independent arithmetic for the synthetic corpus generator.
// Everything here is built from IEEE-754 +, -, *, /, sqrt and exact
// scaling, so results are bit-identical wherever doubles are IEEE and
// floating-point contraction is disabled.

#include <cstdint>
#include <random>

namespace aed::detmath {

double sin(double x);
double cos(double x);
double exp(double x);
double log(double x);
/// 10^(x/20), the linear gain of a level in dB.
double db_to_gain(double db);

/// Deterministic random stream. std::mt19937_64 output is fixed by the
/// standard; the distribution helpers below avoid std::*_distribution,
/// whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 step, used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace aed::detmath
