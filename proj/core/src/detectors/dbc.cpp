#include "aed/detectors/dbc.hpp"

#include <algorithm>
#include <limits>

#include "aed/error.hpp"

namespace aed {
namespace {

SvmModel fit_rbf(const Matrix& X, const std::vector<int>& y, const DbcParams& params,
                 std::uint64_t seed, SvmSelection& selection) {
  selection = select_rbf(X, y, params.c_grid, params.gamma_grid, params.folds, seed,
                         params.tolerance);
  SvmParams p;
  p.c_reg = selection.c_reg;
  p.tolerance = params.tolerance;
  return svm_train(X, y, KernelSpec::rbf(selection.gamma), p);
}

}  // namespace

DbcDetector dbc_train(const SessionList& train, std::size_t n_classes, const DbcParams& params) {
  require(n_classes >= 1, Errc::config, "dbc: empty class inventory");
  require(params.filter_width >= 1 && params.filter_width % 2 == 1, Errc::config,
          "dbc: filter width must be odd");
  require(params.train_stride >= 1, Errc::config, "dbc: train_stride must be >= 1");
  DbcDetector d;
  d.params = params;
  d.n_classes = n_classes;
  d.min_duration.assign(n_classes, std::numeric_limits<double>::infinity());
  std::vector<int> instances(n_classes, 0);

  Matrix X;
  std::vector<int> labels;
  for (const Session* s : train) {
    for (const auto& e : s->events) {
      const auto c = static_cast<std::size_t>(e.label);
      d.min_duration[c] = std::min(d.min_duration[c], e.duration());
      ++instances[c];
    }
    const Matrix desc = describe_grid(s->audio.samples, params.window, params.train_stride);
    const auto lab = label_segments(params.window, s->audio.samples.size(), s->events);
    for (std::size_t i = 0; i < desc.size(); ++i) {
      X.push_back(desc[i]);
      labels.push_back(lab[i * params.train_stride]);
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c)
    if (instances[c] == 0)
      fail(Errc::config, "dbc: class " + std::to_string(c) + " has no training events");

  d.scaler = Standardizer::fit(X);
  d.scaler.apply_inplace(X);

  std::vector<int> binary(labels.size());
  Matrix event_X;
  std::vector<int> event_y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    binary[i] = labels[i] == kBackground ? 0 : 1;
    if (labels[i] != kBackground) {
      event_X.push_back(X[i]);
      event_y.push_back(labels[i]);
    }
  }
  d.binary = fit_rbf(X, binary, params, params.seed, d.binary_selection);
  if (n_classes >= 2)
    d.events = fit_rbf(event_X, event_y, params, params.seed + 1, d.event_selection);
  return d;
}

std::vector<Hypothesis> runs_to_hypotheses(std::span<const int> labels,
                                           std::span<const double> margins,
                                           const SegmentGrid& window, double duration,
                                           std::span<const double> min_duration) {
  std::vector<Hypothesis> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1] == labels[i]) ++j;
    const int label = labels[i];
    if (label != kBackground) {
      const double on = std::max(
          0.0, static_cast<double>(i) * window.hop + 0.5 * window.length - 0.5 * window.hop);
      const double off = std::min(
          duration, static_cast<double>(j) * window.hop + 0.5 * window.length + 0.5 * window.hop);
      double margin = 0.0;
      for (std::size_t k = i; k <= j; ++k) margin += margins[k];
      margin /= static_cast<double>(j - i + 1);
      if (off > on && off - on >= min_duration[static_cast<std::size_t>(label)] - 1e-9)
        out.push_back({on, off, label, std::max(0.0, margin)});
    }
    i = j + 1;
  }
  return out;
}

std::vector<Hypothesis> dbc_detect(const DbcDetector& d, const AudioSignal& signal) {
  require(!d.binary.machines.empty(), Errc::missing_component, "dbc: detector is untrained");
  const Matrix desc = describe_grid(signal.samples, d.params.window);
  if (desc.empty()) return {};
  std::vector<int> labels(desc.size(), kBackground);
  std::vector<double> margins(desc.size(), 0.0);
  for (std::size_t i = 0; i < desc.size(); ++i) {
    const Vector x = d.scaler.apply(desc[i]);
    // classes are {0, 1}; the single machine's positive side is background
    margins[i] = -d.binary.decision_values(x).front();
    if (margins[i] >= 0.0)
      labels[i] = d.n_classes >= 2 ? d.events.predict(x) : 0;
  }
  const auto filtered = mode_filter(labels, d.params.filter_width);
  return runs_to_hypotheses(filtered, margins, d.params.window, signal.duration(), d.min_duration);
}

}  // namespace aed
