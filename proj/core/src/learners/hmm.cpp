#include "aed/learners/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aed/detmath.hpp"
#include "aed/error.hpp"
#include "aed/learners/kmeans.hpp"

namespace aed {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double log_gauss(std::span<const double> x, const Vector& mean, const Vector& var) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - mean[d];
    acc += kLog2Pi + std::log(var[d]) + diff * diff / var[d];
  }
  return -0.5 * acc;
}

std::size_t distinct_rows(Matrix rows) {
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

Vector mean_of(const Matrix& rows) {
  Vector m(rows.front().size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t d = 0; d < m.size(); ++d) m[d] += r[d];
  for (double& v : m) v /= static_cast<double>(rows.size());
  return m;
}

Vector variance_of(const Matrix& rows, const Vector& mean, double floor) {
  Vector v(mean.size(), 0.0);
  for (const auto& r : rows)
    for (std::size_t d = 0; d < v.size(); ++d) v[d] += (r[d] - mean[d]) * (r[d] - mean[d]);
  for (double& x : v) x = std::max(floor, x / static_cast<double>(rows.size()));
  return v;
}

DiagGmm init_gmm(const Matrix& frames, int mixtures, double floor, std::uint64_t seed) {
  const std::size_t k =
      std::min({static_cast<std::size_t>(mixtures), frames.size(), distinct_rows(frames)});
  const Vector state_mean = mean_of(frames);
  const Vector state_var = variance_of(frames, state_mean, floor);
  DiagGmm g;
  if (k <= 1) {
    g.weights = {1.0};
    g.means = {state_mean};
    g.variances = {state_var};
    return g;
  }
  const Codebook cb = kmeans_fit(frames, k, seed);
  std::vector<Matrix> members(k);
  for (const auto& x : frames) members[cb.nearest(x)].push_back(x);
  for (std::size_t m = 0; m < k; ++m) {
    if (members[m].empty()) continue;
    g.weights.push_back(static_cast<double>(members[m].size()) / static_cast<double>(frames.size()));
    g.means.push_back(cb.centroids[m]);
    g.variances.push_back(members[m].size() >= 2 ? variance_of(members[m], cb.centroids[m], floor)
                                                 : state_var);
  }
  return g;
}

struct Accumulator {
  Vector occ;
  Matrix sum;
  Matrix sum_sq;

  explicit Accumulator(const DiagGmm& g)
      : occ(g.components(), 0.0),
        sum(g.components(), Vector(g.dim(), 0.0)),
        sum_sq(g.components(), Vector(g.dim(), 0.0)) {}
};

// Forward pass in log space; alpha[t][s]. Returns log P(X) with exit.
double forward(const HmmModel& hmm, const Matrix& emis, Matrix& alpha) {
  const std::size_t T = emis.size();
  const std::size_t S = hmm.num_states();
  alpha.assign(T, Vector(S, kNegInf));
  alpha[0][0] = emis[0][0];
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[t - 1][s] + safe_log(hmm.self[s]);
      if (s > 0) a = log_add(a, alpha[t - 1][s - 1] + safe_log(1.0 - hmm.self[s - 1]));
      alpha[t][s] = a + emis[t][s];
    }
  return alpha[T - 1][S - 1] + safe_log(1.0 - hmm.self[S - 1]);
}

}  // namespace

double DiagGmm::component_log_likelihoods(std::span<const double> x, Vector& out) const {
  out.resize(components());
  double total = kNegInf;
  for (std::size_t m = 0; m < components(); ++m) {
    out[m] = weights[m] > 0.0 ? std::log(weights[m]) + log_gauss(x, means[m], variances[m]) : kNegInf;
    total = log_add(total, out[m]);
  }
  return total;
}

double DiagGmm::log_likelihood(std::span<const double> x) const {
  require(x.size() == dim(), Errc::dimension_mismatch, "gmm: frame dimension mismatch");
  double total = kNegInf;
  for (std::size_t m = 0; m < components(); ++m)
    if (weights[m] > 0.0)
      total = log_add(total, std::log(weights[m]) + log_gauss(x, means[m], variances[m]));
  return total;
}

Vector HmmModel::transition_row(std::size_t s) const {
  Vector row(num_states() + 1, 0.0);
  row[s] = self[s];
  row[s + 1] = 1.0 - self[s];
  return row;
}

Matrix emission_table(const HmmModel& model, const Matrix& frames) {
  Matrix e(frames.size(), Vector(model.num_states()));
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (std::size_t s = 0; s < model.num_states(); ++s) e[t][s] = model.log_emission(s, frames[t]);
  return e;
}

double hmm_log_likelihood(const HmmModel& model, const Matrix& sequence) {
  require(!sequence.empty(), Errc::empty_input, "hmm: empty sequence");
  Matrix alpha;
  return forward(model, emission_table(model, sequence), alpha);
}

HmmModel hmm_train(const std::vector<Matrix>& sequences, const HmmParams& params,
                   std::uint64_t seed) {
  require(params.states >= 1 && params.mixtures >= 1, Errc::config,
          "hmm: states and mixtures must be >= 1");
  if (sequences.empty()) fail(Errc::empty_input, "hmm: no training sequences");
  const auto S = static_cast<std::size_t>(params.states);
  const std::size_t dim = sequences.front().empty() ? 0 : sequences.front().front().size();
  for (const auto& seq : sequences) {
    if (seq.size() < S)
      fail(Errc::invalid_argument, "hmm: sequence of " + std::to_string(seq.size()) +
                                       " frames is shorter than " + std::to_string(S) + " states");
    for (const auto& x : seq)
      require(x.size() == dim && dim > 0, Errc::dimension_mismatch, "hmm: ragged frames");
  }

  // Uniform segmentation initialisation.
  HmmModel hmm;
  std::vector<Matrix> state_frames(S);
  Vector stays(S, 0.0), visits(S, 0.0);
  for (const auto& seq : sequences) {
    const std::size_t T = seq.size();
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t s = t * S / T;
      state_frames[s].push_back(seq[t]);
      visits[s] += 1.0;
      if (t + 1 < T && (t + 1) * S / T == s) stays[s] += 1.0;
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    hmm.self.push_back(stays[s] / visits[s]);
    hmm.states.push_back(init_gmm(state_frames[s], params.mixtures, params.variance_floor,
                                  detmath::mix_seed(seed, s)));
  }

  Matrix alpha, beta;
  Vector comp;
  for (int iter = 0;; ++iter) {
    double total_ll = 0.0;
    std::vector<Accumulator> acc;
    for (const auto& g : hmm.states) acc.emplace_back(g);
    Vector self_count(S, 0.0), leave_count(S, 0.0);

    for (const auto& seq : sequences) {
      const std::size_t T = seq.size();
      const Matrix emis = emission_table(hmm, seq);
      const double ll = forward(hmm, emis, alpha);
      require(std::isfinite(ll), Errc::invalid_argument, "hmm: sequence has zero likelihood");
      total_ll += ll;

      beta.assign(T, Vector(S, kNegInf));
      beta[T - 1][S - 1] = safe_log(1.0 - hmm.self[S - 1]);
      for (std::size_t t = T - 1; t-- > 0;)
        for (std::size_t s = 0; s < S; ++s) {
          double b = safe_log(hmm.self[s]) + emis[t + 1][s] + beta[t + 1][s];
          if (s + 1 < S)
            b = log_add(b, safe_log(1.0 - hmm.self[s]) + emis[t + 1][s + 1] + beta[t + 1][s + 1]);
          beta[t][s] = b;
        }

      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t s = 0; s < S; ++s) {
          const double lg = alpha[t][s] + beta[t][s] - ll;
          if (lg == kNegInf) continue;
          if (t + 1 < T) {
            self_count[s] += std::exp(alpha[t][s] + safe_log(hmm.self[s]) + emis[t + 1][s] +
                                      beta[t + 1][s] - ll);
            if (s + 1 < S)
              leave_count[s] += std::exp(alpha[t][s] + safe_log(1.0 - hmm.self[s]) +
                                         emis[t + 1][s + 1] + beta[t + 1][s + 1] - ll);
          }
          const double log_b = hmm.states[s].component_log_likelihoods(seq[t], comp);
          auto& a = acc[s];
          for (std::size_t m = 0; m < comp.size(); ++m) {
            if (comp[m] == kNegInf) continue;
            const double r = std::exp(lg + comp[m] - log_b);
            a.occ[m] += r;
            for (std::size_t d = 0; d < dim; ++d) {
              a.sum[m][d] += r * seq[t][d];
              a.sum_sq[m][d] += r * seq[t][d] * seq[t][d];
            }
          }
        }
      leave_count[S - 1] += 1.0;  // every sequence exits from the last state
    }

    hmm.log_likelihoods.push_back(total_ll);
    const auto n = hmm.log_likelihoods.size();
    if (n >= 2 && total_ll - hmm.log_likelihoods[n - 2] < params.tolerance) break;
    if (iter >= params.max_iterations) break;

    for (std::size_t s = 0; s < S; ++s) {
      hmm.self[s] = self_count[s] / (self_count[s] + leave_count[s]);
      auto& g = hmm.states[s];
      const auto& a = acc[s];
      double occ_total = 0.0;
      for (double o : a.occ) occ_total += o;
      for (std::size_t m = 0; m < g.components(); ++m) {
        g.weights[m] = a.occ[m] / occ_total;
        if (!(a.occ[m] > 0.0)) continue;
        for (std::size_t d = 0; d < dim; ++d) {
          const double mu = a.sum[m][d] / a.occ[m];
          g.means[m][d] = mu;
          g.variances[m][d] = std::max(params.variance_floor, a.sum_sq[m][d] / a.occ[m] - mu * mu);
        }
      }
    }
  }
  return hmm;
}

DecodeResult viterbi_network(const std::vector<const HmmModel*>& models,
                             const std::vector<Matrix>& emissions) {
  require(!models.empty(), Errc::invalid_argument, "viterbi: no models");
  require(models.size() == emissions.size(), Errc::dimension_mismatch,
          "viterbi: one emission table per model required");
  const std::size_t T = emissions.front().size();
  if (T == 0) fail(Errc::empty_input, "viterbi: empty frame sequence");
  const std::size_t K = models.size();
  std::vector<std::size_t> offset(K + 1, 0);
  for (std::size_t k = 0; k < K; ++k) {
    require(emissions[k].size() == T, Errc::dimension_mismatch, "viterbi: emission length mismatch");
    offset[k + 1] = offset[k] + models[k]->num_states();
  }
  const std::size_t N = offset[K];
  const double log_entry = -std::log(static_cast<double>(K));
  Vector log_self(N), log_next(N);
  std::vector<int> model_of(N), state_of(N);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t s = 0; s < models[k]->num_states(); ++s) {
      const std::size_t i = offset[k] + s;
      log_self[i] = safe_log(models[k]->self[s]);
      log_next[i] = safe_log(1.0 - models[k]->self[s]);
      model_of[i] = static_cast<int>(k);
      state_of[i] = static_cast<int>(s);
    }

  std::vector<int> back(T * N, -1);
  std::vector<std::uint8_t> entered(T * N, 0);
  Vector prev(N, kNegInf), cur(N, kNegInf);
  for (std::size_t k = 0; k < K; ++k) {
    prev[offset[k]] = log_entry + emissions[k][0][0];
    entered[offset[k]] = 1;
  }
  for (std::size_t t = 1; t < T; ++t) {
    double best_exit = kNegInf;
    int exit_from = -1;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t last = offset[k + 1] - 1;
      const double v = prev[last] + log_next[last];
      if (v > best_exit) {
        best_exit = v;
        exit_from = static_cast<int>(last);
      }
    }
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = offset[k]; i < offset[k + 1]; ++i) {
        double best = prev[i] + log_self[i];
        int from = static_cast<int>(i);
        bool entry = false;
        if (i == offset[k]) {
          const double v = best_exit + log_entry;
          if (v > best) {
            best = v;
            from = exit_from;
            entry = true;
          }
        } else {
          const double v = prev[i - 1] + log_next[i - 1];
          if (v > best) {
            best = v;
            from = static_cast<int>(i - 1);
          }
        }
        const auto s = static_cast<std::size_t>(state_of[i]);
        cur[i] = best + emissions[k][t][s];
        back[t * N + i] = from;
        entered[t * N + i] = entry ? 1 : 0;
      }
    std::swap(prev, cur);
  }

  std::size_t end_state = 0;
  for (std::size_t i = 1; i < N; ++i)
    if (prev[i] > prev[end_state]) end_state = i;

  DecodeResult result;
  result.log_score = prev[end_state];
  std::vector<std::size_t> flat(T);
  flat[T - 1] = end_state;
  for (std::size_t t = T - 1; t > 0; --t)
    flat[t - 1] = static_cast<std::size_t>(back[t * N + flat[t]]);
  result.path.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t i = flat[t];
    result.path[t] = {model_of[i], state_of[i]};
    if (entered[t * N + i])
      result.runs.push_back({model_of[i], t, t + 1});
    else
      result.runs.back().end = t + 1;
  }
  return result;
}

std::pair<double, double> run_to_seconds(std::size_t begin, std::size_t end, double frame_len,
                                         double hop, double duration) {
  const double on = static_cast<double>(begin) * hop + 0.5 * frame_len - 0.5 * hop;
  const double off = static_cast<double>(end - 1) * hop + 0.5 * frame_len + 0.5 * hop;
  return {std::max(0.0, on), std::min(duration, off)};
}

std::vector<Hypothesis> viterbi_decode(const std::vector<const HmmModel*>& models,
                                       std::span<const int> labels, const Matrix& frames,
                                       double frame_len, double hop, double duration) {
  require(labels.size() == models.size(), Errc::dimension_mismatch,
          "viterbi: one label per model required");
  if (frames.empty()) fail(Errc::empty_input, "viterbi: empty frame sequence");
  std::vector<Matrix> emissions;
  for (const auto* m : models) emissions.push_back(emission_table(*m, frames));
  const DecodeResult decoded = viterbi_network(models, emissions);
  std::vector<Hypothesis> out;
  for (const auto& run : decoded.runs) {
    const int label = labels[static_cast<std::size_t>(run.model)];
    if (label < 0) continue;
    const auto [on, off] = run_to_seconds(run.begin, run.end, frame_len, hop, duration);
    if (off > on) out.push_back({on, off, label, 0.0});
  }
  return out;
}

}  // namespace aed
