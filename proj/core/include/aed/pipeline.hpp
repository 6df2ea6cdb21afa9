#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/corpus.hpp"
#include "aed/detectors/asr.hpp"
#include "aed/detectors/dbc.hpp"
#include "aed/detectors/regression.hpp"
#include "aed/evaluation.hpp"
#include "aed/verifiers.hpp"

namespace aed {

enum class DetectorKind { dbc, asr, regression };

const char* to_string(DetectorKind kind);
/// Accepts "dbc", "asr", "regression" (case-insensitive).
DetectorKind detector_kind_from_string(const std::string& name);
inline constexpr DetectorKind kAllDetectorKinds[] = {DetectorKind::dbc, DetectorKind::asr,
                                                     DetectorKind::regression};

using TrainedDetector = std::variant<DbcDetector, AsrDetector, RegDetector>;

DetectorKind kind_of(const TrainedDetector& detector);
std::vector<Hypothesis> detect(const TrainedDetector& detector, const AudioSignal& signal);

/// Versioned model container holding any detector.
nlohmann::json detector_to_json(const TrainedDetector& detector);
TrainedDetector detector_from_json(const nlohmann::json& container);

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

inline constexpr int kConfigSchemaVersion = 1;

struct ExperimentConfig {
  std::uint64_t seed = 1;
  SynthConfig synth;
  /// Existing corpus (classes.txt + WAV/TSV pairs) used instead of synthesis.
  std::optional<std::filesystem::path> corpus_dir;
  /// Explicit split; when both are empty the first `train_fraction` of the
  /// sessions (sorted by id) train and the rest test.
  std::vector<std::string> train_sessions;
  std::vector<std::string> test_sessions;
  double train_fraction = 2.0 / 3.0;
  std::vector<DetectorKind> detectors{std::begin(kAllDetectorKinds), std::end(kAllDetectorKinds)};
  std::vector<VerifierKind> verifiers{std::begin(kAllVerifierKinds), std::end(kAllVerifierKinds)};
  DbcParams dbc;
  AsrParams asr;
  RegParams regression;
  VerifierParams verifier;
  MatchOptions match;

  /// Throws Error{config} naming the offending field.
  void validate() const;
};

/// Full-size parameters (200 trees, 128 mixtures, full grids) on the
/// default synthetic corpus.
ExperimentConfig paper_scale_config();
/// Reduced trees, grids, folds and mixtures that finish in minutes on one
/// core; corpus of 5 classes, 9 two-minute sessions, 1-2 s events.
ExperimentConfig desk_scale_config();

/// Keys present in `j` override the preset named by "preset" ("desk" by
/// default, or "paper"). Unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

CorpusSplit resolve_split(const ExperimentConfig& config, const Corpus& corpus);

// ---------------------------------------------------------------------------
// Training, detection and the detector x verifier matrix
// ---------------------------------------------------------------------------

using ProgressLog = std::function<void(const std::string&)>;

TrainedDetector train_detector(DetectorKind kind, const SessionList& train, std::size_t n_classes,
                               const ExperimentConfig& config);
Verifier train_verifier(VerifierKind kind, const SessionList& train, std::size_t n_classes,
                        const ExperimentConfig& config,
                        std::shared_ptr<const RegDetector> components = nullptr);

using SessionHypotheses = std::vector<std::vector<Hypothesis>>;

SessionHypotheses detect_sessions(const TrainedDetector& detector, const SessionList& sessions);
SessionHypotheses verify_sessions(const SessionHypotheses& hyps, const SpanClassifier& classify,
                                  const SessionList& sessions, VerifyStats* stats = nullptr);
DetectionReport evaluate_sessions(const ClassInventory& classes, const SessionHypotheses& hyps,
                                  const SessionList& sessions, const MatchOptions& match = {});

struct MatrixRow {
  DetectorKind detector = DetectorKind::dbc;
  std::optional<VerifierKind> verifier;  // nullopt = without verification
  DetectionReport report;
  VerifyStats stats;
};

struct MatrixResult {
  std::vector<MatrixRow> baselines;  // one per detector
  std::vector<MatrixRow> verified;   // detector-major order
  std::vector<std::pair<VerifierKind, double>> verifier_accuracy;  // on test events
  double seconds = 0.0;

  const MatrixRow& baseline(DetectorKind detector) const;
  /// Mean overall F1 delta over the verified rows.
  double mean_f1_delta() const;
};

/// Trains every configured detector and verifier on the training sessions
/// and evaluates each detector with and without each verifier.
MatrixResult run_matrix(const Corpus& corpus, const CorpusSplit& split,
                        const ExperimentConfig& config, const ProgressLog& log = {});

std::string format_matrix(const MatrixResult& result);
nlohmann::json to_json(const MatrixResult& result);

}  // namespace aed
