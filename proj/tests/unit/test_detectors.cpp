#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "aed/detectors/asr.hpp"
#include "aed/detectors/common.hpp"
#include "aed/detectors/dbc.hpp"
#include "aed/detectors/regression.hpp"
#include "aed/error.hpp"
#include "aed/pipeline.hpp"
#include "aed/serialization.hpp"
#include "aed_test/oracles.hpp"
#include "aed_test/support.hpp"

using namespace aed;

namespace {

Tree leaf_tree(std::vector<double> value) {
  Tree t;
  t.value_dim = static_cast<int>(value.size());
  t.values = std::move(value);
  t.nodes.push_back({});
  return t;
}

/// Tree sending x[feature] <= threshold to `left`, else to `right`.
Tree stump(int feature, double threshold, std::vector<double> left, std::vector<double> right) {
  Tree t;
  t.value_dim = static_cast<int>(left.size());
  t.nodes.push_back({feature, threshold, 1, 2, 0});
  Tree::Node l, r;
  l.value = 0;
  r.value = t.value_dim;
  t.nodes.push_back(l);
  t.nodes.push_back(r);
  t.values = left;
  t.values.insert(t.values.end(), right.begin(), right.end());
  return t;
}

/// Detector with constant forests: gate `event`, class probabilities
/// `probs`, distances (d_on, d_off) for every class.
RegDetector constant_detector(bool event, std::vector<double> probs, double d_on, double d_off) {
  RegDetector d;
  d.n_classes = probs.size();
  d.bg.n_classes = 2;
  d.bg.n_features = static_cast<int>(kSegmentDim);
  d.bg.trees.push_back(leaf_tree(event ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0}));
  d.ev.n_classes = static_cast<int>(probs.size());
  d.ev.n_features = static_cast<int>(kSegmentDim);
  d.ev.trees.push_back(leaf_tree(probs));
  for (std::size_t c = 0; c < probs.size(); ++c) {
    ForestReg f;
    f.n_features = static_cast<int>(kSegmentDim);
    f.trees.push_back(leaf_tree({d_on, d_off}));
    d.forests.push_back(f);
  }
  d.theta.assign(probs.size(), 0.5);
  d.theta_fraction.assign(probs.size(), 0.5);
  d.theta_scale.assign(probs.size(), 1.0);
  return d;
}

void expect_well_formed(const std::vector<Hypothesis>& hyps, double duration, std::size_t n_classes) {
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    EXPECT_GE(hyps[i].onset, 0.0);
    EXPECT_GT(hyps[i].offset, hyps[i].onset);
    EXPECT_LE(hyps[i].offset, duration + 1e-9);
    EXPECT_GE(hyps[i].score, 0.0);
    EXPECT_GE(hyps[i].label, 0);
    EXPECT_LT(hyps[i].label, static_cast<int>(n_classes));
    if (i > 0) EXPECT_LE(hyps[i - 1].onset, hyps[i].onset);
  }
}

}  // namespace

// --- shared helpers ---------------------------------------------------------

TEST(SegmentGridTest, CountsAndTimes) {
  EXPECT_EQ(kDbcWindows.count(16000 * 10), 91u);
  EXPECT_EQ(kRegSegments.count(16000), 91u);
  EXPECT_EQ(kBowSegments.count(16000), 20u);
  EXPECT_DOUBLE_EQ(kDbcWindows.onset(3), 0.3);
  EXPECT_DOUBLE_EQ(kRegSegments.center(10), 0.15);
  EXPECT_EQ(kDbcWindows.count(100), 0u);
}

TEST(ModeFilter, RemovesIsolatedLabel) {
  std::vector<int> labels(30, 0);
  labels[2] = 1;
  const auto out = mode_filter(labels, 17);
  for (int v : out) EXPECT_EQ(v, 0);
}

TEST(ModeFilter, MatchesDirectOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 80;
    const int alphabet = 2 + static_cast<int>(rng() % 4);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng() % static_cast<unsigned>(alphabet)) - 1;
    const int width = trial % 3 == 0 ? 17 : 1 + 2 * static_cast<int>(rng() % 6);
    EXPECT_EQ(mode_filter(labels, width), aed_test::mode_filter_oracle(labels, width)) << trial;
  }
}

TEST(ModeFilter, EvenWidthIsRejected) {
  EXPECT_THROW(mode_filter(std::vector<int>{1, 2}, 4), Error);
}

TEST(WindowLabels, MatchBruteForceOverlapScan) {
  const Session& s = aed_test::tiny_corpus().sessions[0];
  const std::size_t n = s.audio.samples.size();
  const auto labels = label_segments(kDbcWindows, n, s.events);
  ASSERT_EQ(labels.size(), kDbcWindows.count(n));
  std::size_t events = 0;
  for (std::size_t w = 0; w < labels.size(); ++w) {
    const double on = static_cast<double>(w) * 1600 / 16000.0;
    const double off = on + 1.0;
    int want = kBackground;
    double best = 0.0;
    for (const auto& e : s.events) {
      const double ov = std::max(0.0, std::min(off, e.offset) - std::max(on, e.onset));
      if (ov > best) {
        best = ov;
        want = ov >= 0.5 - 1e-12 ? e.label : kBackground;
      }
    }
    EXPECT_EQ(labels[w], want) << "window " << w;
    if (want != kBackground) ++events;
  }
  EXPECT_GT(events, 0u);
}

TEST(Standardize, ZeroMeanUnitScaleAndConstantColumns) {
  const Matrix rows{{1.0, 5.0}, {3.0, 5.0}, {5.0, 5.0}};
  const Standardizer s = Standardizer::fit(rows);
  EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
  EXPECT_EQ(s.scale[1], 1.0);
  const Vector z = s.apply(rows[2]);
  EXPECT_NEAR(z[0], 2.0 / std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_EQ(z[1], 0.0);
}

TEST(HypothesisTsv, RoundTripAndErrors) {
  const ClassInventory classes({"a", "b"});
  const std::vector<Hypothesis> hyps{{0.1, 0.35, 1, 0.5}, {1.0 / 3.0, 2.0, 0, 0.0}};
  const std::string text = format_hypotheses(hyps, classes);
  EXPECT_EQ(text.substr(0, text.find('\n')), "onset\toffset\tlabel\tscore");
  EXPECT_EQ(parse_hypotheses(text, classes), hyps);
  EXPECT_THROW(parse_hypotheses("onset\toffset\tlabel\tscore\n0.1\t0.2\tz\t0\n", classes), Error);
  EXPECT_THROW(parse_hypotheses("onset\toffset\tlabel\tscore\n0.3\t0.2\ta\t0\n", classes), Error);
}

// --- sliding-window detector ------------------------------------------------

TEST(DbcRuns, ShortRunBelowClassMinimumIsDropped) {
  std::vector<int> labels(30, kBackground);
  std::fill(labels.begin() + 5, labels.begin() + 8, 0);    // 3 windows
  std::fill(labels.begin() + 12, labels.begin() + 25, 1);  // 13 windows
  const std::vector<double> margins(30, 0.4);
  const std::vector<double> min_duration{1.2, 1.2};
  const auto hyps = runs_to_hypotheses(labels, margins, kDbcWindows, 10.0, min_duration);
  ASSERT_EQ(hyps.size(), 1u);
  EXPECT_EQ(hyps[0].label, 1);
  EXPECT_NEAR(hyps[0].offset - hyps[0].onset, 1.3, 1e-9);
  EXPECT_NEAR(hyps[0].onset, 1.2 + 0.45, 1e-9);
  EXPECT_DOUBLE_EQ(hyps[0].score, 0.4);

  const std::vector<double> lenient{0.2, 0.2};
  EXPECT_EQ(runs_to_hypotheses(labels, margins, kDbcWindows, 10.0, lenient).size(), 2u);
}

TEST(DbcTrain, TwoClassesGiveOneMachineAndMinimumDurations) {
  SynthConfig sc = aed_test::tiny_synth_config();
  sc.classes.resize(2);
  sc.sessions = 2;
  sc.session_seconds = 30.0;
  const Corpus corpus = synth_corpus(sc, 5);
  const SessionList train{&corpus.sessions[0], &corpus.sessions[1]};
  const ExperimentConfig cfg = aed_test::tiny_experiment_config();
  const DbcDetector d = dbc_train(train, 2, cfg.dbc);
  EXPECT_EQ(d.events.machines.size(), 1u);
  EXPECT_EQ(d.binary.machines.size(), 1u);
  for (int c = 0; c < 2; ++c) {
    double shortest = 1e9;
    for (const auto* s : train)
      for (const auto& e : s->events)
        if (e.label == c) shortest = std::min(shortest, e.duration());
    EXPECT_DOUBLE_EQ(d.min_duration[static_cast<std::size_t>(c)], shortest);
  }
}

TEST(DbcDetect, ShortSignalGivesNoHypotheses) {
  const ExperimentConfig cfg = aed_test::tiny_experiment_config();
  const DbcDetector d = dbc_train(aed_test::tiny_train(), 3, cfg.dbc);
  AudioSignal shorty;
  shorty.samples.assign(8000, 0.0);
  EXPECT_TRUE(dbc_detect(d, shorty).empty());
}

// --- regression detector ----------------------------------------------------

TEST(RegTargets, DefinitionAndGrid) {
  const auto t = regression_target(2.0, 2.0, 3.5);
  EXPECT_EQ(t[0], 0.0);
  EXPECT_EQ(t[1], 1.5);
  const auto centers = event_segment_centers(4.0, 5.0, kRegSegments);
  ASSERT_EQ(centers.size(), 91u);
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const auto [d_on, d_off] = regression_target(centers[i], 4.0, 5.0);
    EXPECT_NEAR(d_on, 0.05 + 0.01 * static_cast<double>(i), 1e-9);
    EXPECT_NEAR(d_on + d_off, 1.0, 1e-12);
  }
}

TEST(RegVotes, OracleDistancesPeakAtTrueBoundaries) {
  const double on = 1.23, off = 2.71;
  VoteCurves curves = make_curves(2, 0.0, 4.0, 0.01);
  for (double c : event_segment_centers(on, off, kRegSegments)) {
    const auto [d_on, d_off] = regression_target(c, on, off);
    cast_votes(curves, 1, c, 1.0, d_on, d_off);
  }
  const auto argmax = [](const Vector& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  EXPECT_EQ(argmax(curves.onset[1]), 123u);
  EXPECT_EQ(argmax(curves.offset[1]), 271u);
  smooth_curves(curves, 5);
  EXPECT_EQ(argmax(curves.onset[1]), 123u);
  EXPECT_EQ(argmax(curves.offset[1]), 271u);
  const auto hyps = pick_events(curves, std::vector<double>{0.5, 0.5});
  ASSERT_EQ(hyps.size(), 1u);
  EXPECT_NEAR(hyps[0].onset, on, 1e-9);
  EXPECT_NEAR(hyps[0].offset, off, 1e-9);
  EXPECT_EQ(hyps[0].label, 1);
}

TEST(RegVotes, SmoothingKernelIsTriangular) {
  VoteCurves c = make_curves(1, 0.0, 0.1, 0.01);
  c.onset[0][5] = 9.0;
  smooth_curves(c, 5);
  const Vector want{0, 0, 0, 1, 2, 3, 2, 1, 0, 0, 0};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(c.onset[0][i], want[i], 1e-12);
}

TEST(RegVotes, MassEqualsSumOfWeights) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RegDetector d = constant_detector(true, {0.2, 0.5, 0.3}, 0.3, 0.4);
  d.bg.trees[0] = stump(0, 0.0, {1.0, 0.0}, {0.0, 1.0});  // x0 > 0 is event
  Matrix desc(200, Vector(kSegmentDim));
  std::vector<double> centers(200);
  double gated = 0.0;
  for (std::size_t i = 0; i < desc.size(); ++i) {
    for (double& v : desc[i]) v = u(rng);
    centers[i] = 0.05 + 0.01 * static_cast<double>(i);
    if (desc[i][0] > 0.0) gated += 1.0;
  }
  const VoteCurves curves = accumulate_votes(d, desc, centers, 0.0, 2.1);
  const double weights[] = {0.2, 0.5, 0.3};
  for (std::size_t c = 0; c < 3; ++c) {
    double on = 0.0, off = 0.0;
    for (double v : curves.onset[c]) on += v;
    for (double v : curves.offset[c]) off += v;
    EXPECT_NEAR(on, weights[c] * gated, 1e-9);
    EXPECT_NEAR(off, weights[c] * gated, 1e-9);
  }
}

TEST(RegVotes, DoublingWeightsAndThresholdKeepsBoundaries) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> t(0.2, 9.8), w(0.05, 1.0);
  VoteCurves a = make_curves(2, 0.0, 10.0, 0.01), b = a;
  for (int i = 0; i < 300; ++i) {
    const double c = t(rng), weight = w(rng), d_on = 0.3 * w(rng), d_off = 0.3 * w(rng);
    const auto label = static_cast<std::size_t>(i % 2);
    cast_votes(a, label, c, weight, d_on, d_off);
    cast_votes(b, label, c, 2.0 * weight, d_on, d_off);
  }
  smooth_curves(a, 5);
  smooth_curves(b, 5);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < a.bins(); ++i) EXPECT_NEAR(b.onset[c][i], 2.0 * a.onset[c][i], 1e-12);
  const auto ha = pick_events(a, std::vector<double>{0.4, 0.6});
  const auto hb = pick_events(b, std::vector<double>{0.8, 1.2});
  ASSERT_EQ(ha.size(), hb.size());
  ASSERT_FALSE(ha.empty());
  for (std::size_t i = 0; i < ha.size(); ++i) {
    EXPECT_EQ(ha[i].onset, hb[i].onset);
    EXPECT_EQ(ha[i].offset, hb[i].offset);
    EXPECT_EQ(ha[i].label, hb[i].label);
    EXPECT_NEAR(hb[i].score, 2.0 * ha[i].score, 1e-12);
  }
}

TEST(RegDetect, AllBackgroundGivesNoHypotheses) {
  const RegDetector d = constant_detector(false, {0.5, 0.5}, 0.1, 0.1);
  const AudioSignal& sig = aed_test::tiny_corpus().sessions[0].audio;
  EXPECT_TRUE(reg_detect(d, sig.slice(0.0, 3.0)).empty());
  const VoteCurves curves = accumulate_votes(d, sig.slice(0.0, 3.0).samples);
  for (const auto& v : curves.onset)
    for (double x : v) EXPECT_EQ(x, 0.0);
}

// --- end to end on the tiny corpus ------------------------------------------

class TinyDetectors : public ::testing::TestWithParam<DetectorKind> {};

TEST_P(TinyDetectors, DeterministicOrderedAndInsideSignal) {
  const ExperimentConfig cfg = aed_test::tiny_experiment_config();
  const auto train = aed_test::tiny_train();
  const TrainedDetector a = train_detector(GetParam(), train, 3, cfg);
  const TrainedDetector b = train_detector(GetParam(), train, 3, cfg);
  EXPECT_EQ(dump_json(detector_to_json(a)), dump_json(detector_to_json(b)));
  const AudioSignal& sig = aed_test::tiny_corpus().sessions[2].audio;
  const auto ha = detect(a, sig);
  EXPECT_EQ(ha, detect(b, sig));
  EXPECT_FALSE(ha.empty());
  expect_well_formed(ha, sig.duration(), 3);

  const TrainedDetector back = detector_from_json(nlohmann::json::parse(dump_json(detector_to_json(a))));
  EXPECT_EQ(kind_of(back), GetParam());
  EXPECT_EQ(detect(back, sig), ha);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, TinyDetectors,
                         ::testing::Values(DetectorKind::dbc, DetectorKind::asr, DetectorKind::regression),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(RegTrain, ThresholdsAndForestsPerClass) {
  const ExperimentConfig cfg = aed_test::tiny_experiment_config();
  const RegDetector d = reg_train(aed_test::tiny_train(), 3, cfg.regression);
  EXPECT_EQ(d.forests.size(), 3u);
  ASSERT_EQ(d.theta.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_GT(d.theta[c], 0.0);
    EXPECT_NEAR(d.theta[c], d.theta_fraction[c] * d.theta_scale[c], 1e-12);
  }
}

TEST(AsrDetect, HypothesesDoNotOverlap) {
  const ExperimentConfig cfg = aed_test::tiny_experiment_config();
  const AsrDetector d = asr_train(aed_test::tiny_train(), 3, cfg.asr);
  EXPECT_EQ(d.events.size(), 3u);
  for (const auto& m : d.events) EXPECT_EQ(m.num_states(), 3u);
  EXPECT_EQ(d.background.num_states(), 1u);
  const auto hyps = asr_detect(d, aed_test::tiny_corpus().sessions[2].audio);
  for (std::size_t i = 1; i < hyps.size(); ++i) EXPECT_LE(hyps[i - 1].offset, hyps[i].onset + 1e-9);
}

TEST(AsrDetect, CleanTrainingEventIsRecovered) {
  SynthConfig sc = aed_test::tiny_synth_config();
  sc.classes.resize(2);
  sc.sessions = 2;
  sc.session_seconds = 30.0;
  const Corpus corpus = synth_corpus(sc, 9);
  ExperimentConfig cfg = aed_test::tiny_experiment_config();
  const AsrDetector d = asr_train({&corpus.sessions[0], &corpus.sessions[1]}, 2, cfg.asr);
  const auto& e = corpus.sessions[0].events.front();
  const AudioSignal clip = corpus.sessions[0].audio.slice(e.onset, e.offset);
  const auto hyps = asr_detect(d, clip);
  double covered = 0.0;
  for (const auto& h : hyps)
    if (h.label == e.label) covered += overlap(h.onset, h.offset, 0.0, clip.duration());
  EXPECT_GE(covered, 0.8 * clip.duration());
}
