#include "aed/verifiers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "aed/detmath.hpp"
#include "aed/error.hpp"
#include "aed/features.hpp"

namespace aed {
namespace {

std::span<const double> event_span(const Session& s, const EventAnnotation& e) {
  const std::size_t a = s.audio.to_index(e.onset);
  const std::size_t b = std::max(a, s.audio.to_index(e.offset));
  return std::span<const double>(s.audio.samples).subspan(a, b - a);
}

// Relative centre position in [0, 1) of each 50 ms segment of an event.
std::vector<double> segment_positions(std::size_t n_segments, std::size_t n_samples) {
  const SegmentGrid& g = kBowSegments;
  const double duration = static_cast<double>(n_samples) / kSampleRate;
  std::vector<double> pos(n_segments);
  for (std::size_t i = 0; i < n_segments; ++i)
    pos[i] = std::min(g.center(i) / duration, std::nextafter(1.0, 0.0));
  return pos;
}

Matrix chi2_distances(const Matrix& X, std::size_t begin, std::size_t end) {
  const std::size_t n = X.size();
  Matrix d(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> a = std::span<const double>(X[i]).subspan(begin, end - begin);
    for (std::size_t j = i + 1; j < n; ++j)
      d[i][j] = d[j][i] =
          chi2_distance(a, std::span<const double>(X[j]).subspan(begin, end - begin));
  }
  return d;
}

double mean_offdiag(const Matrix& d) {
  double s = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j) {
      s += d[i][j];
      ++pairs;
    }
  const double mean = pairs > 0 ? s / static_cast<double>(pairs) : 0.0;
  return mean > 0.0 ? mean : 1.0;  // identical descriptors: any positive bandwidth works
}

struct Fitted {
  KernelSpec kernel;
  Matrix gram;
  SvmSelection selection;
};

// Single-channel chi2 kernel with A = mean training distance, C by CV.
Fitted fit_chi2(const Matrix& X, std::span<const int> y, const VerifierParams& params) {
  const Matrix d = chi2_distances(X, 0, X.front().size());
  Fitted f;
  f.kernel = KernelSpec::chi2(mean_offdiag(d));
  f.gram.assign(X.size(), Vector(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < X.size(); ++j) f.gram[i][j] = std::exp(-d[i][j] / f.kernel.a_phi);
  f.selection = select_c(f.gram, y, params.c_grid, params.folds, params.seed, params.tolerance);
  return f;
}

Fitted fit_combined(const Matrix& X, std::span<const int> y, std::size_t split,
                    const VerifierParams& params) {
  const Matrix d_phi = chi2_distances(X, 0, split);
  const Matrix d_varphi = chi2_distances(X, split, X.front().size());
  Fitted f;
  f.kernel = KernelSpec::combined(mean_offdiag(d_phi), mean_offdiag(d_varphi), split);
  f.gram.assign(X.size(), Vector(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < X.size(); ++j)
      f.gram[i][j] = std::exp(-(d_phi[i][j] / f.kernel.a_phi + d_varphi[i][j] / f.kernel.a_varphi));
  f.selection = select_c(f.gram, y, params.c_grid, params.folds, params.seed, params.tolerance);
  return f;
}

SvmModel final_svm(const Matrix& X, const Fitted& f, std::span<const int> y,
                   const VerifierParams& params) {
  SvmParams p;
  p.c_reg = f.selection.c_reg;
  p.tolerance = params.tolerance;
  return svm_train_gram(X, f.gram, y, f.kernel, p);
}

}  // namespace

const char* to_string(VerifierKind kind) {
  switch (kind) {
    case VerifierKind::bow: return "bow";
    case VerifierKind::pbow: return "pbow";
    case VerifierKind::bor: return "bor";
    case VerifierKind::hodw: return "hodw";
    case VerifierKind::bor_hodw: return "bor+hodw";
  }
  return "unknown";
}

VerifierKind verifier_kind_from_string(const std::string& name) {
  std::string lower;
  for (char ch : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (VerifierKind k : kAllVerifierKinds)
    if (lower == to_string(k)) return k;
  if (lower == "bor_hodw") return VerifierKind::bor_hodw;
  fail(Errc::config, "unknown verifier kind '" + name + "' (expected bow, pbow, bor, hodw, bor+hodw)");
}

bool needs_regression_components(VerifierKind kind) {
  return kind == VerifierKind::bor || kind == VerifierKind::hodw || kind == VerifierKind::bor_hodw;
}

std::vector<std::size_t> segment_words(std::span<const double> samples, const Codebook& codebook) {
  std::vector<std::size_t> words;
  for (const auto& d : describe_grid(samples, kBowSegments)) words.push_back(codebook.nearest(d));
  return words;
}

Vector word_histogram(std::span<const std::size_t> words, std::size_t vocabulary) {
  Vector h(vocabulary, 0.0);
  for (std::size_t w : words) {
    require(w < vocabulary, Errc::out_of_range, "word index outside the vocabulary");
    h[w] += 1.0;
  }
  if (!words.empty())
    for (double& v : h) v /= static_cast<double>(words.size());
  return h;
}

Vector pyramid_histogram(std::span<const std::size_t> words, std::span<const double> positions,
                         std::size_t vocabulary, int levels) {
  require(levels >= 1, Errc::invalid_argument, "pyramid needs at least one level");
  require(words.size() == positions.size(), Errc::dimension_mismatch,
          "pyramid: one position per word required");
  Vector out;
  for (int l = 1; l <= levels; ++l)
    for (int part = 0; part < l; ++part) {
      std::vector<std::size_t> in_part;
      for (std::size_t i = 0; i < words.size(); ++i) {
        const int p = std::min(l - 1, static_cast<int>(std::floor(positions[i] * l)));
        if (p == part) in_part.push_back(words[i]);
      }
      const Vector h = word_histogram(in_part, vocabulary);
      out.insert(out.end(), h.begin(), h.end());
    }
  return out;
}

Vector bow_descriptor(std::span<const double> samples, const Codebook& codebook) {
  if (samples.size() < kBowSegments.length_samples())
    fail(Errc::empty_input, "bow: span shorter than one 50 ms segment");
  return word_histogram(segment_words(samples, codebook), codebook.size());
}

Vector pbow_descriptor(std::span<const double> samples, const Codebook& codebook, int levels) {
  if (samples.size() < kBowSegments.length_samples())
    fail(Errc::empty_input, "pbow: span shorter than one 50 ms segment");
  const auto words = segment_words(samples, codebook);
  return pyramid_histogram(words, segment_positions(words.size(), samples.size()), codebook.size(),
                           levels);
}

Vector bor_from_curves(const VoteCurves& smoothed, std::span<const double> max_phi) {
  const std::size_t C = smoothed.onset.size();
  require(max_phi.empty() || max_phi.size() == C, Errc::dimension_mismatch,
          "bor: one normalizer per class required");
  Vector phi(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const double on = *std::max_element(smoothed.onset[c].begin(), smoothed.onset[c].end());
    const double off = *std::max_element(smoothed.offset[c].begin(), smoothed.offset[c].end());
    phi[c] = 0.5 * (on + off);
    if (!max_phi.empty() && max_phi[c] > 0.0) phi[c] /= max_phi[c];
  }
  return phi;
}

Vector bor_descriptor(std::span<const double> samples, const RegDetector& components,
                      std::span<const double> max_phi) {
  if (samples.size() < components.params.segment.length_samples())
    fail(Errc::empty_input, "bor: span shorter than one segment");
  VoteCurves curves = accumulate_votes(components, samples, 0.0);
  smooth_curves(curves, components.params.smooth_width);
  return bor_from_curves(curves, max_phi);
}

Vector hodw_from_probabilities(const Matrix& probabilities) {
  if (probabilities.empty()) fail(Errc::empty_input, "hodw: no segments");
  Vector phi(probabilities.front().size(), 0.0);
  for (const auto& p : probabilities)
    for (std::size_t c = 0; c < phi.size(); ++c) phi[c] += p[c];
  for (double& v : phi) v /= static_cast<double>(probabilities.size());
  return phi;
}

Vector hodw_descriptor(std::span<const double> samples, const RegDetector& components) {
  if (samples.size() < components.params.segment.length_samples())
    fail(Errc::empty_input, "hodw: span shorter than one segment");
  Matrix probs;
  for (const auto& d : describe_grid(samples, components.params.segment)) {
    auto p = components.ev.predict_proba(d);
    p.resize(components.n_classes);
    probs.push_back(std::move(p));
  }
  return hodw_from_probabilities(probs);
}

double Verifier::min_span() const {
  if (needs_regression_components(kind)) return components->params.segment.length;
  return kBowSegments.length;
}

Vector Verifier::describe(std::span<const double> samples) const {
  switch (kind) {
    case VerifierKind::bow: return bow_descriptor(samples, codebook);
    case VerifierKind::pbow: return pbow_descriptor(samples, codebook, levels);
    case VerifierKind::bor: return bor_descriptor(samples, *components, max_phi);
    case VerifierKind::hodw: return hodw_descriptor(samples, *components);
    case VerifierKind::bor_hodw: {
      Vector x = bor_descriptor(samples, *components, max_phi);
      const Vector h = hodw_descriptor(samples, *components);
      x.insert(x.end(), h.begin(), h.end());
      return x;
    }
  }
  return {};
}

Verifier verifier_train(VerifierKind kind, const SessionList& train, std::size_t n_classes,
                        const VerifierParams& params,
                        std::shared_ptr<const RegDetector> components) {
  if (needs_regression_components(kind) && !components)
    fail(Errc::missing_component,
         std::string("verifier '") + to_string(kind) + "' needs the regression detector's forests");
  Verifier v;
  v.kind = kind;
  v.n_classes = n_classes;
  v.components = needs_regression_components(kind) ? components : nullptr;

  std::vector<std::span<const double>> spans;
  std::vector<int> y;
  std::vector<int> per_class(n_classes, 0);
  const auto min_samples = static_cast<std::size_t>(std::llround(
      (needs_regression_components(kind) ? kRegSegments.length : kBowSegments.length) *
      kSampleRate));
  for (const Session* s : train)
    for (const auto& e : s->events) {
      const auto sp = event_span(*s, e);
      if (sp.size() < min_samples) continue;
      spans.push_back(sp);
      y.push_back(e.label);
      ++per_class[static_cast<std::size_t>(e.label)];
    }
  for (std::size_t c = 0; c < n_classes; ++c)
    if (per_class[c] == 0)
      fail(Errc::config, "verifier: class " + std::to_string(c) + " has no training events");

  if (kind == VerifierKind::bow || kind == VerifierKind::pbow) {
    std::vector<Matrix> seg(spans.size());
    Matrix pool;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      seg[i] = describe_grid(spans[i], kBowSegments);
      pool.insert(pool.end(), seg[i].begin(), seg[i].end());
    }
    if (params.codebook_sample > 0 && pool.size() > params.codebook_sample) {
      detmath::Rng rng(detmath::mix_seed(params.seed, 7));
      for (std::size_t i = 0; i < params.codebook_sample; ++i)
        std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      pool.resize(params.codebook_sample);
    }
    const std::vector<int> level_grid =
        kind == VerifierKind::bow ? std::vector<int>{1} : params.pyramid_levels;

    double best = -1.0;
    Fitted best_fit;
    Matrix best_X;
    for (int size : params.codebook_sizes) {
      require(size >= 1, Errc::config, "codebook sizes must be >= 1");
      Codebook cb = kmeans_fit(pool, static_cast<std::size_t>(size),
                               detmath::mix_seed(params.seed, static_cast<std::uint64_t>(size)),
                               params.kmeans);
      std::vector<std::vector<std::size_t>> words(spans.size());
      for (std::size_t i = 0; i < spans.size(); ++i)
        for (const auto& d : seg[i]) words[i].push_back(cb.nearest(d));
      for (int levels : level_grid) {
        require(levels >= 1, Errc::config, "pyramid levels must be >= 1");
        Matrix X;
        for (std::size_t i = 0; i < spans.size(); ++i)
          X.push_back(pyramid_histogram(words[i], segment_positions(words[i].size(), spans[i].size()),
                                        cb.size(), levels));
        Fitted f = fit_chi2(X, y, params);
        v.candidates.push_back({size, levels, f.selection.c_reg, f.selection.accuracy});
        if (f.selection.accuracy > best) {
          best = f.selection.accuracy;
          best_fit = std::move(f);
          best_X = std::move(X);
          v.codebook = cb;
          v.levels = levels;
        }
      }
    }
    v.cv_accuracy = best;
    v.svm = final_svm(best_X, best_fit, y, params);
    return v;
  }

  Matrix X;
  if (kind == VerifierKind::bor || kind == VerifierKind::bor_hodw) {
    for (const auto& sp : spans) X.push_back(bor_descriptor(sp, *components));
    v.max_phi.assign(n_classes, 0.0);
    for (const auto& x : X)
      for (std::size_t c = 0; c < n_classes; ++c) v.max_phi[c] = std::max(v.max_phi[c], x[c]);
    for (auto& x : X)
      for (std::size_t c = 0; c < n_classes; ++c)
        if (v.max_phi[c] > 0.0) x[c] /= v.max_phi[c];
  }
  if (kind == VerifierKind::hodw || kind == VerifierKind::bor_hodw) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const Vector h = hodw_descriptor(spans[i], *components);
      if (kind == VerifierKind::hodw)
        X.push_back(h);
      else
        X[i].insert(X[i].end(), h.begin(), h.end());
    }
  }
  const Fitted f = kind == VerifierKind::bor_hodw ? fit_combined(X, y, n_classes, params)
                                                  : fit_chi2(X, y, params);
  v.candidates.push_back({0, 1, f.selection.c_reg, f.selection.accuracy});
  v.cv_accuracy = f.selection.accuracy;
  v.svm = final_svm(X, f, y, params);
  return v;
}

Classification verifier_classify(const Verifier& v, std::span<const double> samples) {
  Classification out;
  const auto need = static_cast<std::size_t>(std::llround(v.min_span() * kSampleRate));
  if (samples.size() < need) {
    out.too_short = true;
    return out;
  }
  out.descriptor = v.describe(samples);
  out.label = v.svm.predict(out.descriptor);
  return out;
}

SpanClassifier span_classifier(const Verifier& v) {
  return [&v](const AudioSignal& signal, double onset, double offset) -> std::optional<int> {
    const std::size_t a = signal.to_index(onset);
    const std::size_t b = std::max(a, signal.to_index(offset));
    const auto c =
        verifier_classify(v, std::span<const double>(signal.samples).subspan(a, b - a));
    if (c.too_short) return std::nullopt;
    return c.label;
  };
}

double verifier_accuracy(const Verifier& v, const SessionList& sessions) {
  std::size_t correct = 0, total = 0;
  for (const Session* s : sessions)
    for (const auto& e : s->events) {
      const auto c = verifier_classify(v, event_span(*s, e));
      if (c.too_short) continue;
      ++total;
      if (c.label == e.label) ++correct;
    }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace aed
