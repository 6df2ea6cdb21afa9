#include "aed/detectors/regression.hpp"

#include <algorithm>
#include <cmath>

#include "aed/detmath.hpp"
#include "aed/error.hpp"
#include "aed/evaluation.hpp"

namespace aed {
namespace {

// Descriptors and labels of every segment of one training session.
struct SessionSegments {
  const Session* session = nullptr;
  Matrix desc;
  std::vector<double> centers;
  std::vector<int> labels;           // class or kBackground (>= 50 % overlap rule)
  std::vector<int> inside;           // index of the event fully containing the segment, or -1
};

SessionSegments segment_session(const Session& s, const SegmentGrid& grid) {
  SessionSegments out;
  out.session = &s;
  out.desc = describe_grid(s.audio.samples, grid);
  out.labels = label_segments(grid, s.audio.samples.size(), s.events);
  out.inside.assign(out.desc.size(), -1);
  for (std::size_t i = 0; i < out.desc.size(); ++i) {
    out.centers.push_back(grid.center(i));
    const double on = grid.onset(i);
    const double off = grid.offset(i);
    for (std::size_t e = 0; e < s.events.size(); ++e)
      if (on >= s.events[e].onset - 1e-9 && off <= s.events[e].offset + 1e-9) {
        out.inside[i] = static_cast<int>(e);
        break;
      }
  }
  return out;
}

// Trains M_bg, M_ev and every F^c on the given sessions.
RegDetector train_models(const std::vector<const SessionSegments*>& data, std::size_t n_classes,
                         const RegParams& params, int bg_trees, int ev_trees, int reg_trees,
                         std::uint64_t seed) {
  Matrix X_bg, X_ev;
  std::vector<int> y_bg, y_ev;
  std::vector<Matrix> X_reg(n_classes);
  std::vector<std::vector<std::array<double, 2>>> t_reg(n_classes);
  for (const auto* seg : data) {
    const auto& events = seg->session->events;
    for (std::size_t i = 0; i < seg->desc.size(); i += params.train_stride) {
      const int label = seg->labels[i];
      X_bg.push_back(seg->desc[i]);
      y_bg.push_back(label == kBackground ? 0 : 1);
      if (label != kBackground) {
        X_ev.push_back(seg->desc[i]);
        y_ev.push_back(label);
      }
      if (seg->inside[i] >= 0) {
        const auto& e = events[static_cast<std::size_t>(seg->inside[i])];
        const auto c = static_cast<std::size_t>(e.label);
        X_reg[c].push_back(seg->desc[i]);
        t_reg[c].push_back(regression_target(seg->centers[i], e.onset, e.offset));
      }
    }
  }
  require(!X_ev.empty(), Errc::config, "regression: no event segments in the training data");
  RegDetector d;
  d.params = params;
  d.n_classes = n_classes;

  ForestParams fp;
  fp.trees = bg_trees;
  fp.seed = detmath::mix_seed(seed, 0);
  d.bg = rf_train_cls(X_bg, y_bg, 2, fp);
  fp.trees = ev_trees;
  fp.seed = detmath::mix_seed(seed, 1);
  d.ev = rf_train_cls(X_ev, y_ev, static_cast<int>(std::max<std::size_t>(n_classes, 2)), fp);
  d.forests.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (X_reg[c].empty()) continue;  // class absent from this subset; casts no votes
    d.forests[c] = rf_train_reg(X_reg[c], t_reg[c],
                                regression_defaults(reg_trees, detmath::mix_seed(seed, 2 + c)));
  }
  return d;
}

std::vector<std::size_t> peaks(const Vector& v, double theta) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < theta || v[i] <= 0.0) continue;
    if (i > 0 && !(v[i] > v[i - 1])) continue;
    if (i + 1 < v.size() && v[i] < v[i + 1]) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace

VoteCurves make_curves(std::size_t n_classes, double begin, double end, double step) {
  require(step > 0.0 && end >= begin, Errc::invalid_argument, "vote curves: bad grid");
  VoteCurves c;
  c.begin = begin;
  c.step = step;
  const auto bins = static_cast<std::size_t>(std::floor((end - begin) / step + 1e-9)) + 1;
  c.onset.assign(n_classes, Vector(bins, 0.0));
  c.offset.assign(n_classes, Vector(bins, 0.0));
  return c;
}

void cast_votes(VoteCurves& curves, std::size_t label, double center, double weight, double d_on,
                double d_off) {
  const auto last = static_cast<long long>(curves.bins()) - 1;
  auto bin = [&](double t) {
    return static_cast<std::size_t>(
        std::clamp(std::llround((t - curves.begin) / curves.step), 0LL, last));
  };
  curves.onset[label][bin(center - d_on)] += weight;
  curves.offset[label][bin(center + d_off)] += weight;
}

void smooth_curves(VoteCurves& curves, int width) {
  require(width >= 1 && width % 2 == 1, Errc::invalid_argument, "smoothing width must be odd");
  const int h = width / 2;
  std::vector<double> k;
  double norm = 0.0;
  for (int j = -h; j <= h; ++j) {
    k.push_back(h + 1 - std::abs(j));
    norm += k.back();
  }
  for (double& w : k) w /= norm;
  auto smooth = [&](Vector& v) {
    Vector out(v.size(), 0.0);
    const auto n = static_cast<long>(v.size());
    for (long i = 0; i < n; ++i)
      for (int j = -h; j <= h; ++j) {
        const long s = i + j;
        if (s >= 0 && s < n) out[static_cast<std::size_t>(i)] += k[static_cast<std::size_t>(j + h)] * v[static_cast<std::size_t>(s)];
      }
    v = std::move(out);
  };
  for (auto& v : curves.onset) smooth(v);
  for (auto& v : curves.offset) smooth(v);
}

std::vector<Hypothesis> pick_class_events(const VoteCurves& curves, std::size_t label,
                                          double theta) {
  const auto on_peaks = peaks(curves.onset[label], theta);
  const auto off_peaks = peaks(curves.offset[label], theta);
  struct Candidate {
    Hypothesis h;
    double combined;
  };
  std::vector<Candidate> cand;
  for (std::size_t a : on_peaks) {
    const auto it = std::upper_bound(off_peaks.begin(), off_peaks.end(), a);
    if (it == off_peaks.end()) continue;
    const double pa = curves.onset[label][a];
    const double pb = curves.offset[label][*it];
    cand.push_back({{curves.time(a), curves.time(*it), static_cast<int>(label), std::min(pa, pb)},
                    pa + pb});
  }
  std::stable_sort(cand.begin(), cand.end(), [](const Candidate& x, const Candidate& y) {
    return x.combined > y.combined;
  });
  std::vector<Hypothesis> kept;
  for (const auto& c : cand) {
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const Hypothesis& k) {
      return overlap(k.onset, k.offset, c.h.onset, c.h.offset) > 0.0;
    });
    if (!clash) kept.push_back(c.h);
  }
  return kept;
}

std::vector<Hypothesis> pick_events(const VoteCurves& curves, std::span<const double> theta) {
  require(theta.size() == curves.onset.size(), Errc::dimension_mismatch,
          "pick_events: one threshold per class required");
  std::vector<Hypothesis> out;
  for (std::size_t c = 0; c < theta.size(); ++c) {
    const auto h = pick_class_events(curves, c, theta[c]);
    out.insert(out.end(), h.begin(), h.end());
  }
  return sort_hypotheses(std::move(out));
}

std::array<double, 2> regression_target(double center, double onset, double offset) {
  return {center - onset, offset - center};
}

std::vector<double> event_segment_centers(double onset, double offset, const SegmentGrid& grid) {
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double start = onset + static_cast<double>(i) * grid.hop;
    if (start + grid.length > offset + 1e-9) break;
    out.push_back(start + 0.5 * grid.length);
  }
  return out;
}

VoteCurves accumulate_votes(const RegDetector& d, const Matrix& descriptors,
                            std::span<const double> centers, double begin, double end) {
  require(descriptors.size() == centers.size(), Errc::dimension_mismatch,
          "accumulate_votes: one centre per descriptor required");
  VoteCurves curves = make_curves(d.n_classes, begin, end, d.params.grid_step);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto gate = d.bg.predict_proba(descriptors[i]);
    if (!(gate[1] > gate[0])) continue;
    const auto p = d.ev.predict_proba(descriptors[i]);
    for (std::size_t c = 0; c < d.n_classes; ++c) {
      if (!(p[c] > 0.0) || d.forests[c].trees.empty()) continue;
      const auto [d_on, d_off] = d.forests[c].predict(descriptors[i]);
      cast_votes(curves, c, centers[i], p[c], d_on, d_off);
    }
  }
  return curves;
}

VoteCurves accumulate_votes(const RegDetector& d, std::span<const double> samples, double begin) {
  const SegmentGrid& grid = d.params.segment;
  const Matrix desc = describe_grid(samples, grid);
  std::vector<double> centers;
  for (std::size_t i = 0; i < desc.size(); ++i) centers.push_back(begin + grid.center(i));
  const double end = begin + static_cast<double>(samples.size()) / kSampleRate;
  return accumulate_votes(d, desc, centers, begin, end);
}

RegDetector reg_train(const SessionList& train, std::size_t n_classes, const RegParams& params) {
  require(n_classes >= 1, Errc::config, "regression: empty class inventory");
  require(params.train_stride >= 1, Errc::config, "regression: train_stride must be >= 1");
  require(params.cv_folds >= 2, Errc::config, "regression: cv_folds must be >= 2");
  require(!params.theta_grid.empty(), Errc::config, "regression: empty threshold grid");
  std::vector<int> instances(n_classes, 0);
  for (const Session* s : train)
    for (const auto& e : s->events) ++instances[static_cast<std::size_t>(e.label)];
  for (std::size_t c = 0; c < n_classes; ++c)
    if (instances[c] == 0)
      fail(Errc::config, "regression: class " + std::to_string(c) + " has no training events");

  std::vector<SessionSegments> data;
  for (const Session* s : train) data.push_back(segment_session(*s, params.segment));
  std::vector<const SessionSegments*> all;
  for (const auto& s : data) all.push_back(&s);

  RegDetector d = train_models(all, n_classes, params, params.bg_trees, params.ev_trees,
                               params.reg_trees, params.seed);

  // Threshold selection: held-out curves from session-wise folds.
  auto cv_trees = [&](int full) { return params.cv_trees > 0 ? params.cv_trees : full; };
  const std::size_t folds = std::min<std::size_t>(static_cast<std::size_t>(params.cv_folds), data.size());
  struct HeldOut {
    VoteCurves curves;
    const Session* session;
  };
  std::vector<HeldOut> held;
  if (folds >= 2) {
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<const SessionSegments*> fit;
      std::vector<const SessionSegments*> test;
      for (std::size_t i = 0; i < data.size(); ++i) (i % folds == f ? test : fit).push_back(&data[i]);
      const RegDetector m =
          train_models(fit, n_classes, params, cv_trees(params.bg_trees), cv_trees(params.ev_trees),
                       cv_trees(params.reg_trees), detmath::mix_seed(params.seed, 100 + f));
      for (const auto* t : test) {
        VoteCurves c = accumulate_votes(m, t->desc, t->centers, 0.0, t->session->audio.duration());
        smooth_curves(c, params.smooth_width);
        held.push_back({std::move(c), t->session});
      }
    }
  } else {
    // A single session cannot be split: tune on the training curves.
    for (const auto& t : data) {
      VoteCurves c = accumulate_votes(d, t.desc, t.centers, 0.0, t.session->audio.duration());
      smooth_curves(c, params.smooth_width);
      held.push_back({std::move(c), t.session});
    }
  }

  d.theta.assign(n_classes, 0.0);
  d.theta_fraction.assign(n_classes, params.theta_grid.front());
  d.theta_scale.assign(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    // Scale: highest hypothesis confidence on the held-out curves.
    double scale = 0.0;
    for (const auto& h : held)
      for (const auto& hyp : pick_class_events(h.curves, c, 0.0)) scale = std::max(scale, hyp.score);
    d.theta_scale[c] = scale;
    double best_f1 = -1.0;
    for (double g : params.theta_grid) {
      std::size_t tp = 0, n_hyp = 0, n_ref = 0;
      for (const auto& h : held) {
        const auto hyps = sort_hypotheses(pick_class_events(h.curves, c, g * scale));
        std::vector<EventAnnotation> refs;
        for (const auto& e : h.session->events)
          if (e.label == static_cast<int>(c)) refs.push_back(e);
        tp += match_events(hyps, refs).pairs.size();
        n_hyp += hyps.size();
        n_ref += refs.size();
      }
      const double f1 = prf(tp, n_hyp, n_ref).f1;
      if (f1 > best_f1) {
        best_f1 = f1;
        d.theta_fraction[c] = g;
      }
    }
    d.theta[c] = std::max(1e-9, d.theta_fraction[c] * scale);
  }
  return d;
}

std::vector<Hypothesis> reg_detect(const RegDetector& d, const AudioSignal& signal) {
  require(!d.bg.trees.empty() && d.theta.size() == d.n_classes, Errc::missing_component,
          "regression: detector is untrained");
  VoteCurves curves = accumulate_votes(d, signal.samples, 0.0);
  smooth_curves(curves, d.params.smooth_width);
  std::vector<Hypothesis> out;
  for (auto h : pick_events(curves, d.theta)) {
    h.onset = std::max(0.0, h.onset);
    h.offset = std::min(signal.duration(), h.offset);
    if (h.offset > h.onset) out.push_back(h);
  }
  return out;
}

}  // namespace aed
