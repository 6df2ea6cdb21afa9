#include "aed/detectors/asr.hpp"

#include <algorithm>

#include "aed/detmath.hpp"
#include "aed/error.hpp"

namespace aed {

Matrix mfcc_rows(std::span<const double> samples, const FrameSpec& spec) {
  Matrix rows;
  for (const auto& f : extract_mfcc(samples, spec)) rows.emplace_back(f.begin(), f.end());
  return rows;
}

AsrDetector asr_train(const SessionList& train, std::size_t n_classes, const AsrParams& params) {
  require(n_classes >= 1, Errc::config, "asr: empty class inventory");
  AsrDetector d;
  d.params = params;
  std::vector<std::vector<Matrix>> per_class(n_classes);
  std::vector<Matrix> background;
  const std::size_t frame = params.spec.frame_samples();
  const std::size_t hop = params.spec.hop_samples();

  for (const Session* s : train) {
    const auto& x = s->audio.samples;
    for (const auto& e : s->events) {
      const std::size_t a = s->audio.to_index(e.onset);
      const std::size_t b = s->audio.to_index(e.offset);
      if (b <= a || b - a < frame) continue;
      Matrix seq = mfcc_rows(std::span<const double>(x).subspan(a, b - a), params.spec);
      if (seq.size() < static_cast<std::size_t>(params.states))
        fail(Errc::invalid_argument, "asr: event at " + std::to_string(e.onset) + " s in " +
                                         s->audio.session_id + " is shorter than " +
                                         std::to_string(params.states) + " frames");
      per_class[static_cast<std::size_t>(e.label)].push_back(std::move(seq));
    }
    // Background sequences: maximal runs of frames that overlap no event.
    const Matrix all = mfcc_rows(x, params.spec);
    Matrix run;
    for (std::size_t t = 0; t < all.size(); ++t) {
      const double on = static_cast<double>(t * hop) / kSampleRate;
      const double off = static_cast<double>(t * hop + frame) / kSampleRate;
      const bool inside = std::any_of(s->events.begin(), s->events.end(), [&](const auto& e) {
        return overlap(on, off, e.onset, e.offset) > 0.0;
      });
      if (!inside) {
        run.push_back(all[t]);
      } else if (!run.empty()) {
        background.push_back(std::move(run));
        run.clear();
      }
    }
    if (!run.empty()) background.push_back(std::move(run));
  }

  HmmParams hp;
  hp.states = params.states;
  hp.mixtures = params.mixtures;
  hp.max_iterations = params.max_iterations;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (per_class[c].empty())
      fail(Errc::config, "asr: class " + std::to_string(c) + " has no training events");
    d.events.push_back(hmm_train(per_class[c], hp, detmath::mix_seed(params.seed, c)));
  }
  if (background.empty()) fail(Errc::config, "asr: training sessions contain no background audio");
  HmmParams bp = hp;
  bp.states = 1;
  bp.mixtures = params.background_mixtures;
  d.background = hmm_train(background, bp, detmath::mix_seed(params.seed, n_classes));
  return d;
}

std::vector<Hypothesis> asr_detect(const AsrDetector& d, const AudioSignal& signal) {
  require(!d.events.empty() && d.background.num_states() == 1, Errc::missing_component,
          "asr: detector is untrained");
  const Matrix frames = mfcc_rows(signal.samples, d.params.spec);
  if (frames.empty()) return {};
  std::vector<const HmmModel*> models;
  std::vector<Matrix> emissions;
  for (const auto& m : d.events) {
    models.push_back(&m);
    emissions.push_back(emission_table(m, frames));
  }
  models.push_back(&d.background);
  emissions.push_back(emission_table(d.background, frames));
  const auto bg = static_cast<int>(d.events.size());

  const DecodeResult decoded = viterbi_network(models, emissions);
  std::vector<Hypothesis> out;
  for (const auto& run : decoded.runs) {
    if (run.model == bg) continue;
    const auto [on, off] = run_to_seconds(run.begin, run.end, d.params.spec.frame_len,
                                          d.params.spec.hop, signal.duration());
    if (!(off > on)) continue;
    double llr = 0.0;
    for (std::size_t t = run.begin; t < run.end; ++t) {
      const auto s = static_cast<std::size_t>(decoded.path[t].state);
      llr += emissions[static_cast<std::size_t>(run.model)][t][s] -
             emissions[static_cast<std::size_t>(bg)][t][0];
    }
    llr /= static_cast<double>(run.end - run.begin);
    out.push_back({on, off, run.model, std::max(0.0, llr)});
  }
  return out;
}

}  // namespace aed
