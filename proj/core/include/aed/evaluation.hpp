#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/types.hpp"

namespace aed {

// ---------------------------------------------------------------------------
// Verification filter
// ---------------------------------------------------------------------------

/// Classifies the audio in [onset, offset) of `signal`. Returns nullopt when
/// the span is too short to classify.
using SpanClassifier =
    std::function<std::optional<int>(const AudioSignal& signal, double onset, double offset)>;

struct VerifyStats {
  std::size_t kept = 0;
  std::size_t rejected = 0;
  std::size_t unverifiable = 0;  // too short; kept
};

/// Keeps each hypothesis whose span the classifier labels with the
/// hypothesis label, or which is too short to classify. Order is preserved.
/// Throws Error{out_of_range} for a hypothesis outside the signal.
std::vector<Hypothesis> verify(std::span<const Hypothesis> hyps, const SpanClassifier& classify,
                               const AudioSignal& signal, VerifyStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Matching and scores
// ---------------------------------------------------------------------------

enum class MatchRule {
  center,         // centre of either interval lies inside the other
  overlap_ratio,  // intersection over union >= min_ratio
};

struct MatchOptions {
  MatchRule rule = MatchRule::center;
  double min_ratio = 0.5;
};

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (hypothesis, reference)
  std::vector<std::size_t> false_positives;                // unmatched hypotheses
  std::vector<std::size_t> misses;                         // unmatched references
};

/// Greedy one-to-one matching of same-label compatible pairs, largest
/// overlap first; ties go to the earlier reference, then the earlier
/// hypothesis.
MatchResult match_events(std::span<const Hypothesis> hyps, std::span<const EventAnnotation> refs,
                         const MatchOptions& options = {});

struct Scores {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// P = TP/hyps (1 with no hypotheses and no references, 0 with no
/// hypotheses otherwise); R = TP/refs (1 with no references);
/// F1 = 2PR/(P+R), or 0 when P+R = 0.
Scores prf(std::size_t tp, std::size_t hyp_count, std::size_t ref_count);
Scores prf(const MatchResult& m, std::size_t hyp_count, std::size_t ref_count);

/// Per-class and pooled scores over one or more sessions.
struct DetectionReport {
  std::vector<std::string> classes;
  std::vector<Scores> per_class;
  Scores overall;

  /// Adds one session's hypotheses and references to the running counts.
  void add(std::span<const Hypothesis> hyps, std::span<const EventAnnotation> refs,
           const MatchOptions& options = {});
  /// Recomputes precision/recall/F1 from the accumulated counts.
  void finalize();
};

DetectionReport make_report(const ClassInventory& classes);

struct MetricDelta {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct DeltaTable {
  std::vector<std::string> classes;
  std::vector<MetricDelta> per_class;
  MetricDelta overall;
};

/// Signed differences `with_verification - without`. Throws Error{config}
/// when the class inventories differ.
DeltaTable compare_reports(const DetectionReport& with_verification,
                           const DetectionReport& without);

/// "+0.135" / "-0.014" with an up/down marker.
std::string format_delta(double delta);

std::string format_report(const DetectionReport& report, const DetectionReport* baseline = nullptr);

nlohmann::json to_json(const Scores& s);
nlohmann::json to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& j);

}  // namespace aed
