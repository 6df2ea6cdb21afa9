#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "aed/error.hpp"
#include "aed/features.hpp"
#include "aed_test/support.hpp"

using namespace aed;

namespace {

std::vector<double> sine(double hz, std::size_t n, double amp = 0.5, double phase = 0.3) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / kSampleRate + phase);
  return x;
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, amp);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

/// Direct-summation MFCC of one frame: Hamming window, |DFT|^2 over 512
/// points, 26 HTK mel triangles with unit peak, natural log with floor,
/// orthonormal DCT-II coefficients 1..12.
std::array<double, 12> reference_mfcc(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  const std::size_t nfft = 512;
  const std::size_t bins = nfft / 2 + 1;
  std::vector<double> power(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1.0));
      acc += w * frame[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / nfft);
    }
    power[k] = std::norm(acc);
  }
  const auto to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  const auto to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::array<double, 28> edge{};
  for (std::size_t i = 0; i < edge.size(); ++i) edge[i] = to_hz(to_mel(8000.0) * i / 27.0);
  std::array<double, 26> logmel{};
  for (std::size_t m = 0; m < 26; ++m) {
    double e = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = k * 16000.0 / nfft;
      double w = 0.0;
      if (f > edge[m] && f <= edge[m + 1]) w = (f - edge[m]) / (edge[m + 1] - edge[m]);
      if (f > edge[m + 1] && f < edge[m + 2]) w = (edge[m + 2] - f) / (edge[m + 2] - edge[m + 1]);
      e += w * power[k];
    }
    logmel[m] = std::log(std::max(e, 1e-10));
  }
  std::array<double, 12> c{};
  for (std::size_t k = 1; k <= 12; ++k)
    for (std::size_t j = 0; j < 26; ++j)
      c[k - 1] += std::sqrt(2.0 / 26.0) * std::cos(std::numbers::pi * k * (j + 0.5) / 26.0) * logmel[j];
  return c;
}

}  // namespace

TEST(FrameSpec, FrameCountFormula) {
  for (std::size_t n : {400u, 401u, 599u, 600u, 16000u, 16123u}) {
    const std::size_t expected = 1 + (n - 400) / 200;
    EXPECT_EQ(kFrames60Spec.frame_count(n), expected);
    EXPECT_EQ(extract_frames60(std::vector<double>(n, 0.0)).size(), expected);
  }
  EXPECT_EQ(kMfccSpec.frame_count(16000), 1 + (16000 - 320) / 160u);
  EXPECT_EQ(kFrames60Spec.frame_count(399), 0u);
}

TEST(FrameSpec, ValidationRejectsBadSpecs) {
  EXPECT_THROW((FrameSpec{0.025, 0.03, 512}.validate()), Error);
  EXPECT_THROW((FrameSpec{0.025, 0.0125, 256}.validate()), Error);
  EXPECT_THROW((FrameSpec{0.025, 0.0125, 500}.validate()), Error);
}

TEST(Frames60, ShorterThanOneFrameIsEmptyInput) {
  try {
    extract_frames60(std::vector<double>(399, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
  EXPECT_THROW(extract_mfcc(std::vector<double>(100, 0.0)), Error);
}

TEST(Frames60, ZeroSignal) {
  const auto frames = extract_frames60(std::vector<double>(4000, 0.0));
  for (const auto& f : frames) {
    EXPECT_EQ(f[frame60::zcr], 0.0);
    EXPECT_EQ(f[frame60::energy], 0.0);
    EXPECT_EQ(f[frame60::centroid], 0.0);
    for (std::size_t b = 0; b < kNumSubbands; ++b) {
      EXPECT_EQ(f[frame60::subband_flux + b], 0.0);
      EXPECT_EQ(f[frame60::subband_energy + b], 0.0);
    }
    for (std::size_t m = 0; m < kNumLfb; ++m) EXPECT_DOUBLE_EQ(f[frame60::lfb + m], std::log(1e-10));
  }
}

TEST(Frames60, ZcrOfPureSineMatchesDirectCount) {
  const auto x = sine(100.0, 8000);
  const auto frames = extract_frames60(x);
  const std::size_t frame = 400, hop = 200;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    int changes = 0;
    for (std::size_t i = 1; i < frame; ++i)
      if (std::signbit(x[t * hop + i]) != std::signbit(x[t * hop + i - 1])) ++changes;
    EXPECT_DOUBLE_EQ(frames[t][frame60::zcr], changes / 399.0);
    EXPECT_NEAR(changes, 5, 1);
  }
}

TEST(Frames60, ConstantSignalHasZeroDeltas) {
  const auto frames = extract_frames60(std::vector<double>(6000, 0.25));
  for (const auto& f : frames)
    for (std::size_t d = frame60::delta; d < frame60::zcr; ++d) EXPECT_EQ(f[d], 0.0) << d;
}

TEST(Frames60, RangeInvariants) {
  const auto frames = extract_frames60(white_noise(8000, 5));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    for (double v : f) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(f[frame60::zcr], 0.0);
    EXPECT_LE(f[frame60::zcr], 1.0);
    EXPECT_GE(f[frame60::energy], 0.0);
    EXPECT_GE(f[frame60::centroid], 0.0);
    EXPECT_LE(f[frame60::centroid], 8000.0);
    EXPECT_GE(f[frame60::bandwidth], 0.0);
    for (std::size_t b = 0; b < kNumSubbands; ++b) {
      EXPECT_GE(f[frame60::subband_energy + b], 0.0);
      EXPECT_GE(f[frame60::subband_flux + b], 0.0);
      if (t == 0) EXPECT_EQ(f[frame60::subband_flux + b], 0.0);
    }
  }
}

TEST(Frames60, AmplitudeScaling) {
  const auto x = white_noise(6000, 9);
  std::vector<double> y(x);
  const double a = 3.0;
  for (double& v : y) v *= a;
  const auto fx = extract_frames60(x);
  const auto fy = extract_frames60(y);
  ASSERT_EQ(fx.size(), fy.size());
  for (std::size_t t = 0; t < fx.size(); ++t) {
    EXPECT_EQ(fx[t][frame60::zcr], fy[t][frame60::zcr]);
    EXPECT_NEAR(fy[t][frame60::centroid], fx[t][frame60::centroid], 1e-9 * fx[t][frame60::centroid]);
    EXPECT_NEAR(fy[t][frame60::bandwidth], fx[t][frame60::bandwidth], 1e-9 * fx[t][frame60::bandwidth]);
    for (std::size_t m = 0; m < kNumLfb; ++m)
      EXPECT_NEAR(fy[t][frame60::lfb + m] - fx[t][frame60::lfb + m], 2.0 * std::log(a), 1e-9);
    EXPECT_NEAR(fy[t][frame60::energy], a * a * fx[t][frame60::energy], 1e-12);
    for (std::size_t b = 0; b < kNumSubbands; ++b)
      EXPECT_NEAR(fy[t][frame60::subband_energy + b], a * a * fx[t][frame60::subband_energy + b],
                  1e-9 * fy[t][frame60::subband_energy + b]);
  }
}

TEST(Frames60, SubbandsPartitionRange) {
  const auto e = filterbank::subband_edges();
  EXPECT_DOUBLE_EQ(e.front(), 100.0);
  EXPECT_DOUBLE_EQ(e.back(), 8000.0);
  for (std::size_t i = 1; i + 1 < e.size(); ++i)
    EXPECT_NEAR(e[i] / e[i - 1], e[i + 1] / e[i], 1e-9);
}

TEST(Frames60, LfbFiltersHaveUnitArea) {
  for (const auto& f : filterbank::lfb(512)) {
    double sum = 0.0;
    for (double w : f) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SegmentDescriptor, SingleFrame) {
  Frame60 f{};
  for (std::size_t d = 0; d < kFrameDim; ++d) f[d] = 0.5 * static_cast<double>(d) - 3.0;
  const Vector v = segment_descriptor(std::vector<Frame60>{f});
  ASSERT_EQ(v.size(), kSegmentDim);
  for (std::size_t d = 0; d < kFrameDim; ++d) {
    EXPECT_EQ(v[d], f[d]);
    EXPECT_EQ(v[kFrameDim + d], 0.0);
  }
}

TEST(SegmentDescriptor, OppositeFrames) {
  Frame60 f{}, g{};
  for (std::size_t d = 0; d < kFrameDim; ++d) {
    f[d] = static_cast<double>(d) - 20.5;
    g[d] = -f[d];
  }
  const Vector v = segment_descriptor(std::vector<Frame60>{f, g});
  for (std::size_t d = 0; d < kFrameDim; ++d) {
    EXPECT_EQ(v[d], 0.0);
    EXPECT_DOUBLE_EQ(v[kFrameDim + d], std::abs(f[d]));
  }
}

TEST(SegmentDescriptor, RepeatedFramesHaveZeroStd) {
  Frame60 f{};
  f.fill(1.7);
  const Vector v = segment_descriptor(std::vector<Frame60>(9, f));
  for (std::size_t d = 0; d < kFrameDim; ++d) EXPECT_NEAR(v[kFrameDim + d], 0.0, 1e-15);
}

TEST(SegmentDescriptor, EmptyIsError) {
  EXPECT_THROW(segment_descriptor(std::vector<Frame60>{}), Error);
}

TEST(Mfcc, ZeroSignalGivesZeroCoefficients) {
  for (const auto& c : extract_mfcc(std::vector<double>(1600, 0.0)))
    for (double v : c) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Mfcc, FramesAreIndependent) {
  const auto x = white_noise(320, 4);
  std::vector<double> twice(x);
  twice.insert(twice.end(), x.begin(), x.end());
  const FrameSpec spec{0.020, 0.020, 512};
  const auto one = extract_mfcc(x, spec);
  const auto two = extract_mfcc(twice, spec);
  ASSERT_EQ(one.size(), 1u);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0], one[0]);
  EXPECT_EQ(two[1], one[0]);
}

TEST(Mfcc, WhiteNoiseMatchesDirectReference) {
  const auto x = white_noise(320 + 160 * 4, 21);
  const auto mfcc = extract_mfcc(x);
  ASSERT_EQ(mfcc.size(), 5u);
  for (std::size_t t = 0; t < mfcc.size(); ++t) {
    const std::vector<double> frame(x.begin() + static_cast<long>(t * 160),
                                    x.begin() + static_cast<long>(t * 160 + 320));
    const auto ref = reference_mfcc(frame);
    for (std::size_t k = 0; k < 12; ++k) EXPECT_NEAR(mfcc[t][k], ref[k], 1e-6) << t << "," << k;
  }
}

TEST(FeatureDump, RoundTripAsFloat32) {
  aed_test::TempDir dir("dump");
  const Matrix rows{{1.0, -2.5, 1.0 / 3.0}, {0.0, 1e-3, 7.0}};
  write_feature_dump(dir / "f.bin", rows);
  const Matrix back = read_feature_dump(dir / "f.bin");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_EQ(back[r][c], static_cast<double>(static_cast<float>(rows[r][c])));
  EXPECT_EQ(aed_test::read_file(dir / "f.bin").size(), 8u + 6u * 4u);
}
