#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "aed/types.hpp"

namespace aed {

/// Framing parameters. fft_size must be a power of two >= frame samples.
struct FrameSpec {
  double frame_len = 0.025;
  double hop = 0.0125;
  int fft_size = 512;

  std::size_t frame_samples() const;
  std::size_t hop_samples() const;
  /// 1 + floor((n - frame) / hop), or 0 when n < frame.
  std::size_t frame_count(std::size_t n_samples) const;
  void validate() const;
};

/// 25 ms frames with 50 % overlap (sliding-window and segment features).
inline constexpr FrameSpec kFrames60Spec{0.025, 0.0125, 512};
/// 20 ms frames with a 10 ms hop (HMM path).
inline constexpr FrameSpec kMfccSpec{0.020, 0.010, 512};

inline constexpr std::size_t kFrameDim = 60;
inline constexpr std::size_t kSegmentDim = 2 * kFrameDim;
inline constexpr std::size_t kMfccDim = 12;
inline constexpr std::size_t kNumLfb = 16;
inline constexpr std::size_t kNumSubbands = 4;

/// Offsets into a 60-dim frame vector.
namespace frame60 {
inline constexpr std::size_t lfb = 0;
inline constexpr std::size_t delta = 16;
inline constexpr std::size_t delta2 = 32;
inline constexpr std::size_t zcr = 48;
inline constexpr std::size_t energy = 49;
inline constexpr std::size_t subband_energy = 50;
inline constexpr std::size_t subband_flux = 54;
inline constexpr std::size_t centroid = 58;
inline constexpr std::size_t bandwidth = 59;
}  // namespace frame60

using Frame60 = std::array<double, kFrameDim>;
using Mfcc = std::array<double, kMfccDim>;

/// The 60-dimensional frame features: 16 log filterbank energies with their
/// first and second regression deltas, zero-crossing rate, short-time
/// energy, four subband energies, four subband fluxes, spectral centroid and
/// bandwidth (Hz). Deltas use a +/-2 frame window with edge replication over
/// the whole sequence.
std::vector<Frame60> extract_frames60(std::span<const double> samples,
                                      const FrameSpec& spec = kFrames60Spec);
inline std::vector<Frame60> extract_frames60(const AudioSignal& signal,
                                             const FrameSpec& spec = kFrames60Spec) {
  return extract_frames60(std::span<const double>(signal.samples), spec);
}

/// Per-dimension mean followed by population standard deviation.
Vector segment_descriptor(std::span<const Frame60> frames);

/// Convenience: segment_descriptor(extract_frames60(samples)).
Vector describe_segment(std::span<const double> samples);

/// c1..c12 from 26 mel filters, natural-log power with floor 1e-10 and an
/// orthonormal DCT-II.
std::vector<Mfcc> extract_mfcc(std::span<const double> samples,
                               const FrameSpec& spec = kMfccSpec);
inline std::vector<Mfcc> extract_mfcc(const AudioSignal& signal,
                                      const FrameSpec& spec = kMfccSpec) {
  return extract_mfcc(std::span<const double>(signal.samples), spec);
}

/// Regression deltas with a +/-2 window and edge replication, applied per
/// column of `rows` (width `dim`, starting at `offset`) into `out_offset`.
void regression_deltas(std::vector<Frame60>& rows, std::size_t offset, std::size_t out_offset,
                       std::size_t dim);

namespace filterbank {
/// 16 triangular filters, centres geometric over [100, 8000] Hz, unit area.
const std::vector<std::vector<double>>& lfb(int fft_size);
/// Band edges of the four geometric subbands partitioning [100, 8000] Hz.
std::array<double, kNumSubbands + 1> subband_edges();
/// 26 HTK-style mel triangles over [0, 8000] Hz (peak 1).
const std::vector<std::vector<double>>& mel(int fft_size);
}  // namespace filterbank

/// Debug dump: little-endian header {u32 rows, u32 dim} then rows*dim f32.
void write_feature_dump(const std::filesystem::path& path, const Matrix& rows);
Matrix read_feature_dump(const std::filesystem::path& path);

}  // namespace aed
