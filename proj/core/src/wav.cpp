#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "aed/corpus.hpp"
#include "aed/error.hpp"

namespace aed {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

struct Format {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const unsigned char* p, const Format& fmt) {
  if (fmt.tag == kFormatFloat) {
    if (fmt.bits == 32) {
      return static_cast<double>(std::bit_cast<float>(read_u32(p)));
    }
    std::uint64_t raw = 0;
    for (int i = 0; i < 8; ++i) raw |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(raw);
  }
  switch (fmt.bits) {
    case 8: return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default: return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
  }
}

}  // namespace

AudioSignal load_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open audio file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    fail(Errc::parse, path.string() + ": not a RIFF/WAVE file");

  Format fmt;
  bool have_fmt = false;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(chunk_size, size - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) fail(Errc::parse, path.string() + ": truncated fmt chunk");
      fmt.tag = read_u16(data + body);
      fmt.channels = read_u16(data + body + 2);
      fmt.rate = read_u32(data + body + 4);
      fmt.bits = read_u16(data + body + 14);
      if (fmt.tag == kFormatExtensible) {
        if (available < 26) fail(Errc::parse, path.string() + ": truncated extensible fmt");
        fmt.tag = read_u16(data + body + 24);  // first bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload = data + body;
      payload_size = available;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  if (!have_fmt || payload == nullptr)
    fail(Errc::parse, path.string() + ": missing fmt or data chunk");
  if (fmt.channels == 0 || fmt.rate == 0)
    fail(Errc::parse, path.string() + ": invalid channel count or sample rate");

  const bool pcm_ok = fmt.tag == kFormatPcm &&
                      (fmt.bits == 8 || fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool float_ok = fmt.tag == kFormatFloat && (fmt.bits == 32 || fmt.bits == 64);
  if (!pcm_ok && !float_ok)
    fail(Errc::unsupported_encoding,
         path.string() + ": unsupported encoding (format tag " + std::to_string(fmt.tag) +
             ", " + std::to_string(fmt.bits) + " bits)");

  const std::size_t bytes_per_sample = fmt.bits / 8u;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  const std::size_t frames = payload_size / frame_bytes;
  std::vector<double> samples(frames);
  for (std::size_t i = 0; i < frames; ++i)
    samples[i] = decode_sample(payload + i * frame_bytes, fmt);

  AudioSignal signal;
  signal.session_id = path.stem().string();
  signal.samples = resample(samples, static_cast<int>(fmt.rate), kSampleRate);
  for (double& s : signal.samples) {
    if (!std::isfinite(s)) s = 0.0;
    s = std::clamp(s, -1.0, 1.0);
  }
  return signal;
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal,
               WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t tag = encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat;
  const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * (bits / 8u));

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * (bits / 8u));
  put_u16(out, static_cast<std::uint16_t>(bits / 8u));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : signal.samples) {
    if (encoding == WavEncoding::pcm16) {
      const long v = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(v, -32768L, 32767L))));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) fail(Errc::io, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) fail(Errc::io, "write failed for " + path.string());
}

std::vector<double> resample(const std::vector<double>& samples, int from_rate,
                             int to_rate) {
  require(from_rate > 0 && to_rate > 0, Errc::invalid_argument, "sample rates must be positive");
  if (from_rate == to_rate) return samples;

  const long g = std::gcd(from_rate, to_rate);
  const long up = to_rate / g;
  const long down = from_rate / g;

  // Low-pass at the lower Nyquist, expressed in input-sample units.
  constexpr double kZeroCrossings = 16.0;
  constexpr double kBeta = 8.0;
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = kZeroCrossings / cutoff;
  const long reach = static_cast<long>(std::ceil(half_width));
  const double norm = std::cyl_bessel_i(0.0, kBeta);

  // taps[phase][j] weights input sample (base + j - reach + 1), where the
  // output position lies phase/up of a sample after base.
  const long taps_per_phase = 2 * reach;
  std::vector<std::vector<double>> taps(static_cast<std::size_t>(up),
                                        std::vector<double>(static_cast<std::size_t>(taps_per_phase)));
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    double sum = 0.0;
    for (long j = 0; j < taps_per_phase; ++j) {
      const double x = static_cast<double>(j - reach + 1) - frac;
      double w = 0.0;
      if (std::abs(x) < half_width) {
        const double r = x / half_width;
        const double kaiser = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / norm;
        const double arg = M_PI * cutoff * x;
        const double sinc = x == 0.0 ? 1.0 : std::sin(arg) / arg;
        w = cutoff * sinc * kaiser;
      }
      taps[static_cast<std::size_t>(phase)][static_cast<std::size_t>(j)] = w;
      sum += w;
    }
    for (double& w : taps[static_cast<std::size_t>(phase)]) w /= sum;
  }

  const auto n_in = static_cast<long>(samples.size());
  const long n_out = n_in * up / down;
  std::vector<double> out(static_cast<std::size_t>(n_out));
  for (long n = 0; n < n_out; ++n) {
    const long pos = n * down;
    const long base = pos / up;
    const long phase = pos % up;
    const auto& h = taps[static_cast<std::size_t>(phase)];
    double acc = 0.0;
    for (long j = 0; j < taps_per_phase; ++j) {
      const long k = base + j - reach + 1;
      if (k >= 0 && k < n_in) acc += h[static_cast<std::size_t>(j)] * samples[static_cast<std::size_t>(k)];
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace aed
