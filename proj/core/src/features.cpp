#include "aed/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>

#include "aed/error.hpp"
#include "aed/fft.hpp"

namespace aed {
namespace {

constexpr double kLogFloor = 1e-10;
constexpr double kLowEdge = 100.0;
constexpr double kHighEdge = 8000.0;
constexpr std::size_t kNumMel = 26;

const std::vector<double>& hamming(std::size_t n) {
  static std::mutex m;
  static std::map<std::size_t, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& w = cache[n];
  if (w.empty()) {
    w.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      w[i] = n == 1 ? 1.0
                    : 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                             static_cast<double>(n - 1));
  }
  return w;
}

double bin_frequency(std::size_t k, int fft_size) {
  return static_cast<double>(k) * kSampleRate / fft_size;
}

// Triangles over `points` (filter m spans points[m-1..m+1]).
std::vector<std::vector<double>> triangles(const std::vector<double>& points, int fft_size,
                                           bool unit_area) {
  const std::size_t bins = static_cast<std::size_t>(fft_size / 2 + 1);
  const std::size_t count = points.size() - 2;
  std::vector<std::vector<double>> filters(count, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < count; ++m) {
    const double lo = points[m], c = points[m + 1], hi = points[m + 2];
    double sum = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = bin_frequency(k, fft_size);
      double w = 0.0;
      if (f > lo && f <= c) w = (f - lo) / (c - lo);
      else if (f > c && f < hi) w = (hi - f) / (hi - c);
      filters[m][k] = w;
      sum += w;
    }
    if (sum <= 0.0) {
      // Narrower than one bin: take the bin nearest the centre frequency.
      const auto k = static_cast<std::size_t>(std::lround(c * fft_size / kSampleRate));
      filters[m][std::min(k, bins - 1)] = 1.0;
      sum = 1.0;
    }
    if (unit_area)
      for (double& w : filters[m]) w /= sum;
  }
  return filters;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void check_input(std::span<const double> samples, const FrameSpec& spec) {
  spec.validate();
  if (samples.size() < spec.frame_samples())
    fail(Errc::empty_input, "signal shorter than one frame (" + std::to_string(samples.size()) +
                                " < " + std::to_string(spec.frame_samples()) + " samples)");
}

}  // namespace

std::size_t FrameSpec::frame_samples() const {
  return static_cast<std::size_t>(std::lround(frame_len * kSampleRate));
}

std::size_t FrameSpec::hop_samples() const {
  return static_cast<std::size_t>(std::lround(hop * kSampleRate));
}

std::size_t FrameSpec::frame_count(std::size_t n_samples) const {
  const std::size_t frame = frame_samples();
  if (n_samples < frame) return 0;
  return 1 + (n_samples - frame) / hop_samples();
}

void FrameSpec::validate() const {
  require(hop > 0.0 && hop <= frame_len, Errc::config, "frame spec needs 0 < hop <= frame_len");
  require(hop_samples() >= 1, Errc::config, "frame hop below one sample");
  require(fft_size >= 2 && std::has_single_bit(static_cast<unsigned>(fft_size)), Errc::config,
          "fft_size must be a power of two");
  require(static_cast<std::size_t>(fft_size) >= frame_samples(), Errc::config,
          "fft_size must cover the frame");
}

namespace filterbank {

const std::vector<std::vector<double>>& lfb(int fft_size) {
  static std::mutex m;
  static std::map<int, std::vector<std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& f = cache[fft_size];
  if (f.empty()) {
    std::vector<double> points(kNumLfb + 2);
    for (std::size_t i = 0; i < points.size(); ++i)
      points[i] = kLowEdge * std::pow(kHighEdge / kLowEdge,
                                      static_cast<double>(i) / static_cast<double>(kNumLfb + 1));
    f = triangles(points, fft_size, true);
  }
  return f;
}

std::array<double, kNumSubbands + 1> subband_edges() {
  std::array<double, kNumSubbands + 1> edges{};
  for (std::size_t i = 0; i <= kNumSubbands; ++i)
    edges[i] = kLowEdge * std::pow(kHighEdge / kLowEdge,
                                   static_cast<double>(i) / static_cast<double>(kNumSubbands));
  edges[kNumSubbands] = kHighEdge;
  return edges;
}

const std::vector<std::vector<double>>& mel(int fft_size) {
  static std::mutex m;
  static std::map<int, std::vector<std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& f = cache[fft_size];
  if (f.empty()) {
    const double top = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> points(kNumMel + 2);
    for (std::size_t i = 0; i < points.size(); ++i)
      points[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(kNumMel + 1));
    f = triangles(points, fft_size, false);
  }
  return f;
}

}  // namespace filterbank

void regression_deltas(std::vector<Frame60>& rows, std::size_t offset, std::size_t out_offset,
                       std::size_t dim) {
  const auto n = static_cast<long>(rows.size());
  auto at = [&](long t, std::size_t d) {
    return rows[static_cast<std::size_t>(std::clamp(t, 0L, n - 1))][offset + d];
  };
  // sum_{k=1..2} k^2 doubled
  constexpr double kNorm = 10.0;
  std::vector<double> out(static_cast<std::size_t>(n) * dim);
  for (long t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d)
      out[static_cast<std::size_t>(t) * dim + d] =
          ((at(t + 1, d) - at(t - 1, d)) + 2.0 * (at(t + 2, d) - at(t - 2, d))) / kNorm;
  for (long t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d)
      rows[static_cast<std::size_t>(t)][out_offset + d] = out[static_cast<std::size_t>(t) * dim + d];
}

std::vector<Frame60> extract_frames60(std::span<const double> samples, const FrameSpec& spec) {
  check_input(samples, spec);
  const std::size_t frame = spec.frame_samples();
  const std::size_t hop = spec.hop_samples();
  const std::size_t count = spec.frame_count(samples.size());
  const auto& window = hamming(frame);
  const auto& lfb = filterbank::lfb(spec.fft_size);
  const auto edges = filterbank::subband_edges();
  const RealFft& fft = real_fft(spec.fft_size);
  const std::size_t bins = static_cast<std::size_t>(spec.fft_size / 2 + 1);

  std::array<std::size_t, kNumSubbands> band_lo{}, band_hi{};
  for (std::size_t b = 0; b < kNumSubbands; ++b) {
    band_lo[b] = bins;
    band_hi[b] = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = bin_frequency(k, spec.fft_size);
      const bool inside = f >= edges[b] && (f < edges[b + 1] || (b + 1 == kNumSubbands && f <= edges[b + 1]));
      if (inside) {
        band_lo[b] = std::min(band_lo[b], k);
        band_hi[b] = std::max(band_hi[b], k + 1);
      }
    }
  }

  std::vector<Frame60> out(count);
  std::vector<double> buffer(frame);
  std::vector<double> power;
  std::vector<double> magnitude(bins), previous(bins, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    const auto x = samples.subspan(t * hop, frame);
    Frame60& v = out[t];
    v.fill(0.0);

    std::size_t crossings = 0;
    double energy = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
      energy += x[i] * x[i];
      if (i > 0 && ((x[i - 1] < 0.0) != (x[i] < 0.0))) ++crossings;
    }
    v[frame60::zcr] = frame > 1 ? static_cast<double>(crossings) / static_cast<double>(frame - 1) : 0.0;
    v[frame60::energy] = energy / static_cast<double>(frame);

    for (std::size_t i = 0; i < frame; ++i) buffer[i] = x[i] * window[i];
    fft.power_spectrum(buffer, power);
    for (double& p : power) p /= static_cast<double>(frame);

    for (std::size_t m = 0; m < kNumLfb; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += lfb[m][k] * power[k];
      v[frame60::lfb + m] = std::log(std::max(e, kLogFloor));
    }

    double norm = 0.0, mag_sum = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      magnitude[k] = std::sqrt(power[k]);
      norm += power[k];
      mag_sum += magnitude[k];
      weighted += magnitude[k] * bin_frequency(k, spec.fft_size);
    }
    norm = std::sqrt(norm);
    if (mag_sum > 0.0) {
      const double centroid = weighted / mag_sum;
      double spread = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double d = bin_frequency(k, spec.fft_size) - centroid;
        spread += magnitude[k] * d * d;
      }
      v[frame60::centroid] = centroid;
      v[frame60::bandwidth] = std::sqrt(spread / mag_sum);
    }

    for (std::size_t k = 0; k < bins; ++k) magnitude[k] = norm > 0.0 ? magnitude[k] / norm : 0.0;
    for (std::size_t b = 0; b < kNumSubbands; ++b) {
      double e = 0.0, flux = 0.0;
      for (std::size_t k = band_lo[b]; k < band_hi[b]; ++k) {
        e += power[k];
        if (t > 0) flux += std::max(0.0, magnitude[k] - previous[k]);
      }
      v[frame60::subband_energy + b] = e;
      v[frame60::subband_flux + b] = flux;
    }
    std::swap(magnitude, previous);
  }

  regression_deltas(out, frame60::lfb, frame60::delta, kNumLfb);
  regression_deltas(out, frame60::delta, frame60::delta2, kNumLfb);
  return out;
}

Vector segment_descriptor(std::span<const Frame60> frames) {
  if (frames.empty()) fail(Errc::empty_input, "segment descriptor needs at least one frame");
  Vector out(kSegmentDim, 0.0);
  const auto n = static_cast<double>(frames.size());
  for (const auto& f : frames)
    for (std::size_t d = 0; d < kFrameDim; ++d) out[d] += f[d];
  for (std::size_t d = 0; d < kFrameDim; ++d) out[d] /= n;
  for (const auto& f : frames)
    for (std::size_t d = 0; d < kFrameDim; ++d) {
      const double diff = f[d] - out[d];
      out[kFrameDim + d] += diff * diff;
    }
  for (std::size_t d = 0; d < kFrameDim; ++d) out[kFrameDim + d] = std::sqrt(out[kFrameDim + d] / n);
  return out;
}

Vector describe_segment(std::span<const double> samples) {
  const auto frames = extract_frames60(samples);
  return segment_descriptor(frames);
}

std::vector<Mfcc> extract_mfcc(std::span<const double> samples, const FrameSpec& spec) {
  check_input(samples, spec);
  const std::size_t frame = spec.frame_samples();
  const std::size_t hop = spec.hop_samples();
  const std::size_t count = spec.frame_count(samples.size());
  const auto& window = hamming(frame);
  const auto& mel = filterbank::mel(spec.fft_size);
  const RealFft& fft = real_fft(spec.fft_size);

  static const std::vector<std::vector<double>> dct = [] {
    std::vector<std::vector<double>> basis(kMfccDim, std::vector<double>(kNumMel));
    const double scale = std::sqrt(2.0 / static_cast<double>(kNumMel));
    for (std::size_t k = 1; k <= kMfccDim; ++k)
      for (std::size_t n = 0; n < kNumMel; ++n)
        basis[k - 1][n] = scale * std::cos(M_PI * static_cast<double>(k) *
                                           (static_cast<double>(n) + 0.5) /
                                           static_cast<double>(kNumMel));
    return basis;
  }();

  std::vector<Mfcc> out(count);
  std::vector<double> buffer(frame), power, logmel(kNumMel);
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t i = 0; i < frame; ++i) buffer[i] = samples[t * hop + i] * window[i];
    fft.power_spectrum(buffer, power);
    for (std::size_t m = 0; m < kNumMel; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += mel[m][k] * power[k];
      logmel[m] = std::log(std::max(e, kLogFloor));
    }
    for (std::size_t k = 0; k < kMfccDim; ++k) {
      double c = 0.0;
      for (std::size_t n = 0; n < kNumMel; ++n) c += dct[k][n] * logmel[n];
      out[t][k] = c;
    }
  }
  return out;
}

void write_feature_dump(const std::filesystem::path& path, const Matrix& rows) {
  const auto dim = rows.empty() ? std::size_t{0} : rows.front().size();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  put(static_cast<std::uint32_t>(rows.size()));
  put(static_cast<std::uint32_t>(dim));
  for (const auto& r : rows) {
    require(r.size() == dim, Errc::dimension_mismatch, "ragged feature matrix");
    for (double v : r) put(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

Matrix read_feature_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  auto get = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) fail(Errc::parse, path.string() + ": truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  const std::uint32_t rows = get();
  const std::uint32_t dim = get();
  Matrix out(rows, Vector(dim));
  for (auto& r : out)
    for (double& v : r) v = static_cast<double>(std::bit_cast<float>(get()));
  return out;
}

}  // namespace aed
