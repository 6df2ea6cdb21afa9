#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aed/corpus.hpp"
#include "aed/types.hpp"

namespace aed {

/// Label used for non-event windows and segments.
inline constexpr int kBackground = -1;

/// Fixed-length analysis segments at a fixed hop, laid out on the sample
/// grid: segment n covers samples [n*hop, n*hop + length).
struct SegmentGrid {
  double length = 0.1;  // seconds
  double hop = 0.01;    // seconds

  std::size_t length_samples() const;
  std::size_t hop_samples() const;
  /// 1 + floor((n - length) / hop), or 0 when the signal is too short.
  std::size_t count(std::size_t n_samples) const;
  double onset(std::size_t n) const;
  double offset(std::size_t n) const { return onset(n) + length; }
  double center(std::size_t n) const { return onset(n) + 0.5 * length; }
};

/// 1 s windows at 0.1 s shift (sliding-window detector).
inline constexpr SegmentGrid kDbcWindows{1.0, 0.1};
/// 100 ms segments at 10 ms hop (regression detector, BoR and HoDW).
inline constexpr SegmentGrid kRegSegments{0.1, 0.01};
/// Non-overlapping 50 ms segments (BoW and PBoW).
inline constexpr SegmentGrid kBowSegments{0.05, 0.05};

/// 120-dim mean/std descriptor of every `stride`-th segment of `samples`.
Matrix describe_grid(std::span<const double> samples, const SegmentGrid& grid,
                     std::size_t stride = 1);

/// Label of each grid segment: the class of the event covering the largest
/// share of it when that share is >= min_fraction of the segment length,
/// else kBackground.
std::vector<int> label_segments(const SegmentGrid& grid, std::size_t n_samples,
                                std::span<const EventAnnotation> events,
                                double min_fraction = 0.5);

/// Modal filter over a categorical sequence with edge replication. Ties go
/// to the previous output label, then the centre input label, then the
/// smallest label. `width` must be odd.
std::vector<int> mode_filter(std::span<const int> labels, int width);

/// Training sessions gathered for a detector or verifier.
using SessionList = std::vector<const Session*>;

/// Per-feature z-scoring fitted on training rows; constant features keep
/// scale 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& rows);
  Vector apply(std::span<const double> x) const;
  void apply_inplace(Matrix& rows) const;
};

/// Time-ordered copy (by onset, then offset, then label).
std::vector<Hypothesis> sort_hypotheses(std::vector<Hypothesis> hyps);

/// TSV with header `onset	offset	label	score`.
std::string format_hypotheses(std::span<const Hypothesis> hyps, const ClassInventory& classes);
std::vector<Hypothesis> parse_hypotheses(const std::string& text, const ClassInventory& classes);
void write_hypotheses(const std::filesystem::path& path, std::span<const Hypothesis> hyps,
                      const ClassInventory& classes);
std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path,
                                        const ClassInventory& classes);

}  // namespace aed
