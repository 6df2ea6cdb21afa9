#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aed/detectors/common.hpp"
#include "aed/detectors/regression.hpp"
#include "aed/evaluation.hpp"
#include "aed/learners/kmeans.hpp"
#include "aed/learners/svm.hpp"

namespace aed {

enum class VerifierKind { bow, pbow, bor, hodw, bor_hodw };

const char* to_string(VerifierKind kind);
/// Accepts "bow", "pbow", "bor", "hodw", "bor+hodw" (case-insensitive).
VerifierKind verifier_kind_from_string(const std::string& name);
inline constexpr VerifierKind kAllVerifierKinds[] = {VerifierKind::bow, VerifierKind::pbow,
                                                     VerifierKind::bor, VerifierKind::hodw,
                                                     VerifierKind::bor_hodw};

/// True for kinds built on the regression detector's forests.
bool needs_regression_components(VerifierKind kind);

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

/// Codeword of each non-overlapping 50 ms segment of `samples`.
std::vector<std::size_t> segment_words(std::span<const double> samples, const Codebook& codebook);

/// L1-normalized word histogram (all zeros when `words` is empty).
Vector word_histogram(std::span<const std::size_t> words, std::size_t vocabulary);

/// Pyramid of histograms: level l = 1..levels splits [0, 1) into l equal
/// parts and a word at relative position p falls into part floor(p * l).
/// Histograms are concatenated in (level, part) order; empty parts are zero.
Vector pyramid_histogram(std::span<const std::size_t> words, std::span<const double> positions,
                         std::size_t vocabulary, int levels);

/// Throws Error{empty_input} when `samples` is shorter than one segment.
Vector bow_descriptor(std::span<const double> samples, const Codebook& codebook);
Vector pbow_descriptor(std::span<const double> samples, const Codebook& codebook, int levels);

/// phi_c = (max onset curve + max offset curve) / 2 over the span's
/// smoothed vote curves, divided by max_phi_c when given.
Vector bor_from_curves(const VoteCurves& smoothed, std::span<const double> max_phi = {});
Vector bor_descriptor(std::span<const double> samples, const RegDetector& components,
                      std::span<const double> max_phi = {});

/// Mean of per-segment class-probability rows.
Vector hodw_from_probabilities(const Matrix& probabilities);
Vector hodw_descriptor(std::span<const double> samples, const RegDetector& components);

// ---------------------------------------------------------------------------
// Training and classification
// ---------------------------------------------------------------------------

struct VerifierParams {
  std::vector<int> codebook_sizes = {50, 100, 150, 200, 250};
  std::vector<int> pyramid_levels = {2, 3, 4};
  std::vector<double> c_grid = pow2_grid(-3, 7);
  int folds = 10;
  double tolerance = 1e-3;
  KmeansParams kmeans;
  /// Segments drawn (without replacement) for codebook learning; 0 = all.
  std::size_t codebook_sample = 0;
  std::uint64_t seed = 1;
};

/// One candidate of the hyperparameter search.
struct VerifierCandidate {
  int codebook_size = 0;  // BoW / PBoW
  int levels = 1;         // PBoW
  double c_reg = 1.0;
  double accuracy = 0.0;  // cross-validated
};

struct Verifier {
  VerifierKind kind = VerifierKind::bow;
  std::size_t n_classes = 0;
  Codebook codebook;                             // BoW / PBoW
  int levels = 1;                                // PBoW
  std::shared_ptr<const RegDetector> components; // BoR / HoDW / BoR+HoDW
  Vector max_phi;                                // BoR / BoR+HoDW
  SvmModel svm;
  std::vector<VerifierCandidate> candidates;
  double cv_accuracy = 0.0;

  /// Shortest span (seconds) this verifier can describe.
  double min_span() const;
  Vector describe(std::span<const double> samples) const;
};

/// Trains on the annotated events of `train`. Kinds built on the
/// regression detector require `components`.
Verifier verifier_train(VerifierKind kind, const SessionList& train, std::size_t n_classes,
                        const VerifierParams& params,
                        std::shared_ptr<const RegDetector> components = nullptr);

struct Classification {
  bool too_short = false;
  int label = -1;
  Vector descriptor;
};

Classification verifier_classify(const Verifier& v, std::span<const double> samples);

/// Adapter for the verification filter.
SpanClassifier span_classifier(const Verifier& v);

/// Fraction of the annotated events of `sessions` classified correctly.
double verifier_accuracy(const Verifier& v, const SessionList& sessions);

}  // namespace aed
