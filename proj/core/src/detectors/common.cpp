#include "aed/detectors/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "aed/error.hpp"
#include "aed/features.hpp"

namespace aed {

std::size_t SegmentGrid::length_samples() const {
  return static_cast<std::size_t>(std::llround(length * kSampleRate));
}

std::size_t SegmentGrid::hop_samples() const {
  return static_cast<std::size_t>(std::llround(hop * kSampleRate));
}

std::size_t SegmentGrid::count(std::size_t n_samples) const {
  const std::size_t len = length_samples();
  if (n_samples < len) return 0;
  return 1 + (n_samples - len) / hop_samples();
}

double SegmentGrid::onset(std::size_t n) const {
  return static_cast<double>(n * hop_samples()) / kSampleRate;
}

Matrix describe_grid(std::span<const double> samples, const SegmentGrid& grid,
                     std::size_t stride) {
  require(stride >= 1, Errc::invalid_argument, "segment stride must be >= 1");
  const std::size_t n = grid.count(samples.size());
  const std::size_t len = grid.length_samples();
  const std::size_t hop = grid.hop_samples();
  Matrix out;
  out.reserve((n + stride - 1) / stride);
  for (std::size_t i = 0; i < n; i += stride)
    out.push_back(describe_segment(samples.subspan(i * hop, len)));
  return out;
}

std::vector<int> label_segments(const SegmentGrid& grid, std::size_t n_samples,
                                std::span<const EventAnnotation> events, double min_fraction) {
  const std::size_t n = grid.count(n_samples);
  std::vector<int> labels(n, kBackground);
  for (std::size_t i = 0; i < n; ++i) {
    const double on = grid.onset(i);
    const double off = grid.offset(i);
    double best = 0.0;
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (events[e].onset >= off || events[e].offset <= on) continue;
      const double ov = overlap(on, off, events[e].onset, events[e].offset);
      if (ov > best) {
        best = ov;
        if (ov >= min_fraction * grid.length - 1e-12) labels[i] = events[e].label;
      }
    }
  }
  return labels;
}

std::vector<int> mode_filter(std::span<const int> labels, int width) {
  require(width >= 1 && width % 2 == 1, Errc::invalid_argument, "mode filter width must be odd");
  const auto n = static_cast<long>(labels.size());
  const long half = width / 2;
  std::vector<int> out(labels.size());
  std::map<int, int> counts;
  for (long i = 0; i < n; ++i) {
    counts.clear();
    for (long k = i - half; k <= i + half; ++k)
      ++counts[labels[static_cast<std::size_t>(std::clamp(k, 0L, n - 1))]];
    int best_count = 0;
    for (const auto& [label, c] : counts) best_count = std::max(best_count, c);
    auto is_top = [&](int label) {
      const auto it = counts.find(label);
      return it != counts.end() && it->second == best_count;
    };
    int choice = 0;
    if (i > 0 && is_top(out[static_cast<std::size_t>(i - 1)]))
      choice = out[static_cast<std::size_t>(i - 1)];
    else if (is_top(labels[static_cast<std::size_t>(i)]))
      choice = labels[static_cast<std::size_t>(i)];
    else
      for (const auto& [label, c] : counts)
        if (c == best_count) {
          choice = label;
          break;
        }
    out[static_cast<std::size_t>(i)] = choice;
  }
  return out;
}

Standardizer Standardizer::fit(const Matrix& rows) {
  require(!rows.empty(), Errc::empty_input, "standardizer: no rows");
  const std::size_t d = rows.front().size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
  for (double& m : s.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) s.scale[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
  for (double& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(rows.size()));
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

Vector Standardizer::apply(std::span<const double> x) const {
  require(x.size() == mean.size(), Errc::dimension_mismatch, "standardizer: dimension mismatch");
  Vector out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean[k]) / scale[k];
  return out;
}

void Standardizer::apply_inplace(Matrix& rows) const {
  for (auto& r : rows) r = apply(r);
}

std::vector<Hypothesis> sort_hypotheses(std::vector<Hypothesis> hyps) {
  std::stable_sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    if (a.offset != b.offset) return a.offset < b.offset;
    return a.label < b.label;
  });
  return hyps;
}

std::string format_hypotheses(std::span<const Hypothesis> hyps, const ClassInventory& classes) {
  std::string out = "onset\toffset\tlabel\tscore\n";
  for (const auto& h : hyps) {
    out += format_seconds(h.onset);
    out += '\t';
    out += format_seconds(h.offset);
    out += '\t';
    out += classes.name(h.label);
    out += '\t';
    out += format_seconds(h.score);
    out += '\n';
  }
  return out;
}

std::vector<Hypothesis> parse_hypotheses(const std::string& text, const ClassInventory& classes) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<Hypothesis> out;
  auto number = [&](const std::string& field, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v))
      fail(Errc::parse, "line " + std::to_string(line_no) + ": " + what + " is not a number");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "onset\toffset\tlabel\tscore")
        fail(Errc::parse, "line 1: expected header 'onset<TAB>offset<TAB>label<TAB>score'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, '\t');) f.push_back(field);
    if (f.size() != 4)
      fail(Errc::parse, "line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    Hypothesis h;
    h.onset = number(f[0], "onset");
    h.offset = number(f[1], "offset");
    h.score = number(f[3], "score");
    h.label = classes.find(f[2]);
    if (h.label < 0)
      fail(Errc::parse, "line " + std::to_string(line_no) + ": unknown class '" + f[2] + "'");
    if (!(h.offset > h.onset))
      fail(Errc::parse, "line " + std::to_string(line_no) + ": offset must exceed onset");
    out.push_back(h);
  }
  if (line_no == 0) fail(Errc::parse, "line 1: missing header");
  return out;
}

void write_hypotheses(const std::filesystem::path& path, std::span<const Hypothesis> hyps,
                      const ClassInventory& classes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << format_hypotheses(hyps, classes);
}

std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path,
                                        const ClassInventory& classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open hypothesis file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_hypotheses(buffer.str(), classes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace aed
