#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "aed/detectors/common.hpp"
#include "aed/learners/forest.hpp"

namespace aed {

struct RegParams {
  SegmentGrid segment = kRegSegments;
  int bg_trees = 200;
  int ev_trees = 200;
  int reg_trees = 200;
  /// Trees per forest inside threshold cross-validation (0 = same as above).
  int cv_trees = 0;
  /// Use every n-th training segment (1 = all).
  std::size_t train_stride = 1;
  int cv_folds = 5;
  std::vector<double> theta_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  double grid_step = 0.01;  // confidence-curve resolution, seconds
  int smooth_width = 5;     // triangular smoothing window, bins
  std::uint64_t seed = 1;
};

/// Regression-based detector: segment gating (M_bg), segment class
/// probabilities (M_ev), per-class onset/offset distance forests (F^c) and
/// per-class peak thresholds.
struct RegDetector {
  RegParams params;
  std::size_t n_classes = 0;
  ForestCls bg;                  // 0 = background, 1 = event
  ForestCls ev;                  // class probabilities
  std::vector<ForestReg> forests;
  Vector theta;                  // absolute peak threshold per class
  Vector theta_fraction;         // chosen grid value per class
  Vector theta_scale;            // max held-out hypothesis score per class
};

/// Per-class onset and offset confidence curves on a regular time grid.
struct VoteCurves {
  double begin = 0.0;  // time of bin 0
  double step = 0.01;
  Matrix onset;        // [class][bin]
  Matrix offset;

  std::size_t bins() const { return onset.empty() ? 0 : onset.front().size(); }
  double time(std::size_t bin) const { return begin + static_cast<double>(bin) * step; }
};

VoteCurves make_curves(std::size_t n_classes, double begin, double end, double step);

/// Adds one vote pair: weight at center - d_on (onset) and center + d_off
/// (offset); positions outside the grid are clamped to its ends.
void cast_votes(VoteCurves& curves, std::size_t label, double center, double weight, double d_on,
                double d_off);

/// Normalized triangular smoothing ([1 2 3 2 1] / 9 for width 5), zero
/// padded at the ends.
void smooth_curves(VoteCurves& curves, int width);

/// Onset peaks >= theta paired with the nearest later offset peak >= theta;
/// overlapping same-class pairs keep the one with the larger peak sum.
/// Score = min(onset peak, offset peak).
std::vector<Hypothesis> pick_events(const VoteCurves& curves, std::span<const double> theta);
std::vector<Hypothesis> pick_class_events(const VoteCurves& curves, std::size_t label,
                                          double theta);

/// Training targets (t - onset, offset - t) for a centre time t.
std::array<double, 2> regression_target(double center, double onset, double offset);

/// Segment centres fully inside [onset, offset) on a grid anchored at the
/// event onset: onset + length/2, + hop, ...
std::vector<double> event_segment_centers(double onset, double offset, const SegmentGrid& grid);

/// Raw (unsmoothed) vote curves of `samples` (placed at time `begin`),
/// restricted to segments that M_bg labels as event.
VoteCurves accumulate_votes(const RegDetector& d, std::span<const double> samples,
                            double begin = 0.0);
/// Same from precomputed segment descriptors whose centres are given.
VoteCurves accumulate_votes(const RegDetector& d, const Matrix& descriptors,
                            std::span<const double> centers, double begin, double end);

RegDetector reg_train(const SessionList& train, std::size_t n_classes, const RegParams& params);

std::vector<Hypothesis> reg_detect(const RegDetector& detector, const AudioSignal& signal);

}  // namespace aed
