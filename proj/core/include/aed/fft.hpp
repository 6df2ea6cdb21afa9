#pragma once

#include <span>
#include <vector>

namespace aed {

/// Real-input FFT of a fixed power-of-two size, backed by FFTW. Plans are
/// created once per size; execute() is safe to call concurrently.
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return size_; }

  /// Zero-pads `input` to size() and writes |X_k|^2 for k = 0..size/2.
  void power_spectrum(std::span<const double> input, std::vector<double>& power) const;

 private:
  int size_;
  void* plan_;
};

/// Shared instance for `size`; lives for the whole program.
const RealFft& real_fft(int size);

}  // namespace aed
