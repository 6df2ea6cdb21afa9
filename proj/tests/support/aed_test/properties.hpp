#pragma once
// Property checks shared by the unit tests and the acceptance binary. Each
// returns an empty string on success, otherwise a description of the
// first violation.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aed/evaluation.hpp"
#include "aed_test/oracles.hpp"

namespace aed_test {

/// True when `sub` is an order-preserving subsequence of `full`.
inline bool is_subsequence(const std::vector<aed::Hypothesis>& sub,
                           const std::vector<aed::Hypothesis>& full) {
  std::size_t j = 0;
  for (const auto& h : sub) {
    while (j < full.size() && !(full[j] == h)) ++j;
    if (j == full.size()) return false;
    ++j;
  }
  return true;
}

/// Set-shrinking, idempotence and recall monotonicity of the verification
/// filter on `lists` random hypothesis lists with deterministic stubs.
inline std::string check_verification_algebra(std::uint64_t seed, int lists) {
  std::mt19937_64 rng(seed);
  constexpr int kClasses = 4;
  aed::AudioSignal signal;
  signal.samples.assign(static_cast<std::size_t>(20 * aed::kSampleRate), 0.0);
  for (int i = 0; i < lists; ++i) {
    const auto hyps = random_hypotheses(rng, 40, kClasses, signal.duration());
    const auto refs = references_near(hyps, rng);
    const auto classify = hashing_classifier(kClasses, i % 3 == 0 ? 0.0 : 0.2, rng());
    aed::VerifyStats stats;
    const auto once = aed::verify(hyps, classify, signal, &stats);
    const auto twice = aed::verify(once, classify, signal);
    std::ostringstream why;
    if (once.size() > hyps.size() || !is_subsequence(once, hyps))
      why << "list " << i << ": output is not a subsequence of the input";
    else if (twice != once)
      why << "list " << i << ": verification is not idempotent";
    else if (stats.kept + stats.unverifiable + stats.rejected != hyps.size() ||
             stats.kept + stats.unverifiable != once.size())
      why << "list " << i << ": inconsistent kept/rejected counts";
    else {
      const auto before = aed::match_events(hyps, refs);
      const auto after = aed::match_events(once, refs);
      const auto r0 = aed::prf(before, hyps.size(), refs.size()).recall;
      const auto r1 = aed::prf(after, once.size(), refs.size()).recall;
      if (r1 > r0) why << "list " << i << ": recall rose from " << r0 << " to " << r1;
    }
    if (!why.str().empty()) return why.str();
  }
  return {};
}

}  // namespace aed_test
