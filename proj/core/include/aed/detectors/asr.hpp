#pragma once

#include <cstdint>
#include <vector>

#include "aed/detectors/common.hpp"
#include "aed/features.hpp"
#include "aed/learners/hmm.hpp"

namespace aed {

struct AsrParams {
  FrameSpec spec = kMfccSpec;
  int states = 3;
  int mixtures = 128;
  int background_mixtures = 128;
  int max_iterations = 20;
  std::uint64_t seed = 1;
};

/// Connected-HMM detector: one left-to-right HMM per class plus a
/// single-state background GMM, decoded jointly with Viterbi.
struct AsrDetector {
  AsrParams params;
  std::vector<HmmModel> events;  // index = class
  HmmModel background;
};

AsrDetector asr_train(const SessionList& train, std::size_t n_classes, const AsrParams& params);

/// Hypotheses are the decoded non-background runs. Score is the mean
/// per-frame log-likelihood ratio of the decoded states against the
/// background model, floored at 0.
std::vector<Hypothesis> asr_detect(const AsrDetector& detector, const AudioSignal& signal);

/// MFCC frames of `samples` as matrix rows.
Matrix mfcc_rows(std::span<const double> samples, const FrameSpec& spec);

}  // namespace aed
