#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aed/types.hpp"

namespace aed {

/// Diagonal-covariance Gaussian mixture. Components with zero weight are
/// inactive and never contribute to the likelihood.
struct DiagGmm {
  Vector weights;
  Matrix means;
  Matrix variances;

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  /// log sum_m w_m N(x; mu_m, diag(var_m))
  double log_likelihood(std::span<const double> x) const;
  /// Per-component log(w_m N_m(x)); returns their log-sum.
  double component_log_likelihoods(std::span<const double> x, Vector& out) const;
};

/// Left-to-right HMM. State s loops with probability self[s] and moves on
/// with 1 - self[s]; leaving the last state exits the model.
struct HmmModel {
  Vector self;                  // per-state self-loop probability
  std::vector<DiagGmm> states;  // per-state emission densities
  Vector log_likelihoods;       // training log-likelihood per EM iteration

  std::size_t num_states() const { return states.size(); }
  std::size_t dim() const { return states.empty() ? 0 : states.front().dim(); }
  /// Transition matrix row s over (states..., exit); each row sums to 1.
  Vector transition_row(std::size_t s) const;
  double log_emission(std::size_t s, std::span<const double> x) const {
    return states[s].log_likelihood(x);
  }
};

struct HmmParams {
  int states = 3;
  int mixtures = 8;
  int max_iterations = 20;
  double tolerance = 1e-4;       // stop once the log-likelihood gain drops below this
  double variance_floor = 1e-6;
};

/// Baum-Welch training on isolated sequences (rows are frames). Every
/// sequence starts in the first state and exits from the last.
/// Throws Error{invalid_argument} for sequences shorter than the state count.
HmmModel hmm_train(const std::vector<Matrix>& sequences, const HmmParams& params,
                   std::uint64_t seed);

/// log P(sequence | model), summed over all paths that exit the last state.
double hmm_log_likelihood(const HmmModel& model, const Matrix& sequence);

/// Emission table for `model` over `frames`: result[t][s] = log b_s(x_t).
Matrix emission_table(const HmmModel& model, const Matrix& frames);

/// Contiguous frame run [begin, end) assigned to one model by decoding.
struct DecodedRun {
  int model = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// One state on the best path: model index and state within the model.
struct PathState {
  int model = 0;
  int state = 0;
  friend bool operator==(const PathState&, const PathState&) = default;
};

struct DecodeResult {
  std::vector<PathState> path;
  std::vector<DecodedRun> runs;  // a run ends wherever the path leaves a model
  double log_score = 0.0;
};

/// Connected Viterbi decoding over a loop of models. Entry into any model
/// has probability 1/K at the start and after every model exit; the path
/// may end in any state. `emissions[k]` is the emission table of model k.
DecodeResult viterbi_network(const std::vector<const HmmModel*>& models,
                             const std::vector<Matrix>& emissions);

/// Maps a frame run to seconds: the run covers the centre hop of each
/// frame, clamped to [0, duration].
std::pair<double, double> run_to_seconds(std::size_t begin, std::size_t end, double frame_len,
                                         double hop, double duration);

/// Decodes `frames` with `models` (labels[k] < 0 marks background) and
/// returns the non-background runs as hypotheses with score 0.
std::vector<Hypothesis> viterbi_decode(const std::vector<const HmmModel*>& models,
                                       std::span<const int> labels, const Matrix& frames,
                                       double frame_len, double hop, double duration);

}  // namespace aed
