#include "aed/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "aed/error.hpp"

namespace aed {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// Per-thread scratch so execute calls never share buffers.
struct Scratch {
  std::unique_ptr<double, FftwDeleter> in;
  std::unique_ptr<fftw_complex, FftwDeleter> out;
  int size = 0;
};

Scratch& scratch_for(int size) {
  thread_local std::map<int, Scratch> cache;
  Scratch& s = cache[size];
  if (s.size != size) {
    s.in.reset(static_cast<double*>(fftw_malloc(sizeof(double) * static_cast<std::size_t>(size))));
    s.out.reset(static_cast<fftw_complex*>(
        fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(size / 2 + 1))));
    s.size = size;
  }
  return s;
}

}  // namespace

RealFft::RealFft(int size) : size_(size), plan_(nullptr) {
  require(size >= 2 && (size & (size - 1)) == 0, Errc::invalid_argument,
          "FFT size must be a power of two");
  Scratch& s = scratch_for(size);
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_ = fftw_plan_dft_r2c_1d(size, s.in.get(), s.out.get(), FFTW_ESTIMATE);
  if (plan_ == nullptr) fail(Errc::invalid_argument, "FFTW planning failed");
}

RealFft::~RealFft() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void RealFft::power_spectrum(std::span<const double> input, std::vector<double>& power) const {
  Scratch& s = scratch_for(size_);
  const std::size_t n = std::min<std::size_t>(input.size(), static_cast<std::size_t>(size_));
  std::copy_n(input.begin(), n, s.in.get());
  std::fill(s.in.get() + n, s.in.get() + size_, 0.0);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), s.in.get(), s.out.get());
  const std::size_t bins = static_cast<std::size_t>(size_ / 2 + 1);
  power.resize(bins);
  for (std::size_t k = 0; k < bins; ++k)
    power[k] = s.out.get()[k][0] * s.out.get()[k][0] + s.out.get()[k][1] * s.out.get()[k][1];
}

const RealFft& real_fft(int size) {
  static std::mutex m;
  static std::map<int, std::unique_ptr<RealFft>> instances;
  std::lock_guard<std::mutex> lock(m);
  auto& slot = instances[size];
  if (!slot) slot = std::make_unique<RealFft>(size);
  return *slot;
}

}  // namespace aed
