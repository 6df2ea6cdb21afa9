#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aed/detectors/common.hpp"
#include "aed/learners/svm.hpp"

namespace aed {

struct DbcParams {
  SegmentGrid window = kDbcWindows;
  int filter_width = 17;
  std::vector<double> c_grid = pow2_grid(-3, 7);
  std::vector<double> gamma_grid = pow2_grid(-7, 3);
  int folds = 10;
  /// Use every n-th training window (1 = all).
  std::size_t train_stride = 1;
  double tolerance = 1e-3;
  std::uint64_t seed = 1;
};

/// Sliding-window detector: an event/background SVM and a multiclass event
/// SVM over standardized window descriptors.
struct DbcDetector {
  DbcParams params;
  std::size_t n_classes = 0;
  Standardizer scaler;
  SvmModel binary;   // labels 0 = background, 1 = event
  SvmModel events;   // labels = class indices
  Vector min_duration;  // shortest training instance per class, seconds
  SvmSelection binary_selection;
  SvmSelection event_selection;
};

DbcDetector dbc_train(const SessionList& train, std::size_t n_classes, const DbcParams& params);

std::vector<Hypothesis> dbc_detect(const DbcDetector& detector, const AudioSignal& signal);

/// Turns a filtered per-window label sequence into hypotheses: maximal runs
/// of one event label, extended by half a window on each side of the grid
/// extent, clamped to [0, duration], dropped when shorter than the class
/// minimum. `margins` holds the event-side binary margin per window.
std::vector<Hypothesis> runs_to_hypotheses(std::span<const int> labels,
                                           std::span<const double> margins,
                                           const SegmentGrid& window, double duration,
                                           std::span<const double> min_duration);

}  // namespace aed
