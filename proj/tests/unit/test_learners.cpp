#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "aed/error.hpp"
#include "aed/learners/forest.hpp"
#include "aed/learners/hmm.hpp"
#include "aed/learners/kernels.hpp"
#include "aed/learners/kmeans.hpp"
#include "aed/learners/svm.hpp"
#include "aed/serialization.hpp"
#include "aed_test/oracles.hpp"

using namespace aed;

namespace {

Matrix random_rows(std::mt19937_64& rng, std::size_t n, std::size_t d, bool nonneg) {
  std::uniform_real_distribution<double> u(nonneg ? 0.0 : -1.0, 1.0);
  Matrix X(n, Vector(d));
  for (auto& r : X)
    for (double& v : r) v = u(rng);
  return X;
}

Matrix random_histograms(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  Matrix X = random_rows(rng, n, d, true);
  for (auto& r : X) {
    double s = 0.0;
    for (double v : r) s += v;
    for (double& v : r) v /= s;
  }
  return X;
}

HmmModel random_hmm(std::mt19937_64& rng, std::size_t states) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  HmmModel m;
  for (std::size_t s = 0; s < states; ++s) {
    m.self.push_back(u(rng));
    DiagGmm g;
    g.weights = {1.0};
    g.means = {{0.0}};
    g.variances = {{1.0}};
    m.states.push_back(g);
  }
  return m;
}

}  // namespace

// --- k-means ----------------------------------------------------------------

TEST(Kmeans, DistinctPointsBecomeCentroids) {
  const Matrix X{{0.0, 0.0}, {1.0, 5.0}, {-3.0, 2.0}, {4.0, -1.0}};
  const Codebook cb = kmeans_fit(X, 4, 3);
  std::set<Vector> got(cb.centroids.begin(), cb.centroids.end());
  std::set<Vector> want(X.begin(), X.end());
  EXPECT_EQ(got, want);
}

TEST(Kmeans, SeparatedBlobsRecoverMeans) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.1);
  Matrix X;
  Vector mean_a(2, 0.0), mean_b(2, 0.0);
  for (int i = 0; i < 50; ++i) {
    X.push_back({g(rng), g(rng)});
    X.push_back({10.0 + g(rng), -10.0 + g(rng)});
  }
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t d = 0; d < 2; ++d) (i % 2 == 0 ? mean_a : mean_b)[d] += X[i][d] / 50.0;
  const Codebook cb = kmeans_fit(X, 2, 9);
  ASSERT_EQ(cb.size(), 2u);
  const std::size_t ia = cb.nearest(mean_a);
  const std::size_t ib = cb.nearest(mean_b);
  ASSERT_NE(ia, ib);
  for (std::size_t d = 0; d < 2; ++d) {
    EXPECT_NEAR(cb.centroids[ia][d], mean_a[d], 1e-9);
    EXPECT_NEAR(cb.centroids[ib][d], mean_b[d], 1e-9);
  }
}

TEST(Kmeans, DeterministicAndTooFewPointsRejected) {
  std::mt19937_64 rng(1);
  const Matrix X = random_rows(rng, 60, 3, false);
  EXPECT_EQ(kmeans_fit(X, 5, 2).centroids, kmeans_fit(X, 5, 2).centroids);
  try {
    kmeans_fit(Matrix(3, Vector{1.0}), 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
  }
}

TEST(Kmeans, NearestPrefersLowestIndexOnTies) {
  Codebook cb{{{1.0}, {-1.0}}};
  EXPECT_EQ(cb.nearest(std::vector<double>{0.0}), 0u);
}

// --- kernels ----------------------------------------------------------------

TEST(Chi2, HandValues) {
  const Vector u{1.0, 0.0}, v{0.0, 1.0}, h{0.5, 0.5};
  EXPECT_EQ(chi2_distance(u, u), 0.0);
  EXPECT_EQ(chi2_distance(h, h), 0.0);
  EXPECT_NEAR(chi2_distance(u, v), 1.0, 1e-11);
  EXPECT_NEAR(chi2_distance(u, h), 0.5 * (0.25 / 1.5 + 0.25 / 0.5), 1e-11);
}

TEST(Chi2, RejectsBadInput) {
  EXPECT_THROW(chi2_distance(Vector{1.0}, Vector{1.0, 2.0}), Error);
  EXPECT_THROW(chi2_distance(Vector{-1.0}, Vector{1.0}), Error);
}

TEST(CombinedKernel, HandValues) {
  const Vector p1{1.0, 0.0}, p2{0.0, 1.0}, q{0.3, 0.7};
  const ChannelPair a{p1, q}, b{p2, q};
  EXPECT_NEAR(combined_kernel(a, a, 0.7, 1.3), 1.0, 1e-12);
  const double D = chi2_distance(p1, p2);
  EXPECT_NEAR(combined_kernel(a, b, D, 0.4), std::exp(-1.0), 1e-12);
  EXPECT_EQ(combined_kernel(a, b, 0.5, 2.0), combined_kernel(b, a, 0.5, 2.0));
  EXPECT_THROW(combined_kernel(a, b, 0.0, 1.0), Error);
  EXPECT_THROW(KernelSpec::chi2(-1.0).validate(), Error);
}

TEST(Kernels, SpecMatchesFreeFunctions) {
  const Vector x{0.2, 0.8, 0.1, 0.9}, y{0.6, 0.4, 0.5, 0.5};
  const auto comb = KernelSpec::combined(0.3, 0.2, 2);
  const ChannelPair a{std::span<const double>(x).first(2), std::span<const double>(x).subspan(2)};
  const ChannelPair b{std::span<const double>(y).first(2), std::span<const double>(y).subspan(2)};
  EXPECT_EQ(comb(x, y), combined_kernel(a, b, 0.3, 0.2));
  EXPECT_NEAR(KernelSpec::chi2(0.5)(x, y), std::exp(-chi2_distance(x, y) / 0.5), 1e-15);
  double sq = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sq += (x[i] - y[i]) * (x[i] - y[i]);
  EXPECT_NEAR(KernelSpec::rbf(2.0)(x, y), std::exp(-2.0 * sq), 1e-15);
}

TEST(Kernels, MeanChi2DistanceOverPairs) {
  const Matrix rows{{1.0, 0.0, 9.0}, {0.0, 1.0, 9.0}, {0.5, 0.5, 9.0}};
  const double expected =
      (chi2_distance(Vector{1, 0}, Vector{0, 1}) + chi2_distance(Vector{1, 0}, Vector{0.5, 0.5}) +
       chi2_distance(Vector{0, 1}, Vector{0.5, 0.5})) / 3.0;
  EXPECT_NEAR(mean_chi2_distance(rows, 0, 2), expected, 1e-15);
}

TEST(Kernels, GramMatricesArePsdWithUnitDiagonal) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 19);
    const Matrix H = random_histograms(rng, n, 6);
    Matrix C = H;
    const Matrix H2 = random_histograms(rng, n, 4);
    for (std::size_t i = 0; i < n; ++i) C[i].insert(C[i].end(), H2[i].begin(), H2[i].end());
    const double a1 = std::max(mean_chi2_distance(C, 0, 6), 1e-3);
    const double a2 = std::max(mean_chi2_distance(C, 6, 10), 1e-3);
    for (const auto& [rows, spec] :
         std::vector<std::pair<Matrix, KernelSpec>>{{random_rows(rng, n, 5, false), KernelSpec::rbf(0.7)},
                                                    {H, KernelSpec::chi2(a1)},
                                                    {C, KernelSpec::combined(a1, a2, 6)}}) {
      const Matrix G = gram_matrix(rows, spec);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(G[i][i], 1.0, 1e-12);
        for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(G[i][j], G[j][i]);
      }
      EXPECT_GE(aed_test::min_eigenvalue(G), -1e-8);
    }
  }
}

// --- SVM --------------------------------------------------------------------

TEST(Svm, SeparableOneDimensional) {
  const Matrix X{{-3.0}, {-2.5}, {-2.0}, {-1.5}, {1.5}, {2.0}, {2.5}, {3.0}};
  const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
  const SvmModel m = svm_train(X, y, KernelSpec::rbf(0.5), {10.0});
  for (std::size_t i = 0; i < X.size(); ++i) EXPECT_EQ(m.predict(X[i]), y[i]);
  ASSERT_EQ(m.machines.size(), 1u);
  for (double c : m.machines[0].coef) EXPECT_LE(std::abs(c), 10.0 + 1e-12);
}

TEST(Svm, ThreeClassesGiveThreeMachines) {
  const Matrix X{{0.0, 0.0}, {0.1, 0.0}, {5.0, 0.0}, {5.1, 0.0}, {0.0, 5.0}, {0.0, 5.1}};
  const std::vector<int> y{4, 4, 7, 7, 9, 9};
  const SvmModel m = svm_train(X, y, KernelSpec::rbf(0.2), {4.0});
  EXPECT_EQ(m.machines.size(), 3u);
  EXPECT_EQ(m.classes, (std::vector<int>{4, 7, 9}));
  for (std::size_t i = 0; i < X.size(); ++i) EXPECT_EQ(m.predict(X[i]), y[i]);
}

TEST(Svm, SingleClassIsRejected) {
  const Matrix X{{0.0}, {1.0}};
  const std::vector<int> y{3, 3};
  EXPECT_THROW(svm_train(X, y, KernelSpec::rbf(1.0), {}), Error);
}

TEST(Svm, DualObjectiveMatchesBruteForce) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 6);
    const Matrix X = random_rows(rng, n, 2, false);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % 2 == 0 ? 1 : -1;
    const double C = trial % 3 == 0 ? 0.5 : (trial % 3 == 1 ? 2.0 : 20.0);
    const Matrix G = gram_matrix(X, KernelSpec::rbf(1.5));
    std::vector<std::size_t> index(n);
    for (std::size_t i = 0; i < n; ++i) index[i] = i;
    const DualSolution sol = smo_solve(G, index, y, {C, 1e-3});
    const double oracle = aed_test::brute_force_dual_max(G, y, C);
    EXPECT_NEAR(sol.objective, oracle, 1e-3) << "trial " << trial;
    EXPECT_LE(sol.objective, oracle + 1e-9);
    EXPECT_NEAR(sol.objective, dual_objective(G, index, y, sol.alpha), 1e-9);
    double balance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(sol.alpha[i], 0.0);
      EXPECT_LE(sol.alpha[i], C);
      balance += sol.alpha[i] * y[i];
    }
    EXPECT_NEAR(balance, 0.0, 1e-9);
  }
}

TEST(Svm, LabelFlipFlipsDecisionSign) {
  std::mt19937_64 rng(5);
  const Matrix X = random_rows(rng, 12, 2, false);
  std::vector<int> y(12), flipped(12);
  for (std::size_t i = 0; i < 12; ++i) {
    y[i] = X[i][0] + 0.3 * X[i][1] > 0.0 ? 1 : 0;
    flipped[i] = 1 - y[i];
  }
  const SvmModel a = svm_train(X, y, KernelSpec::rbf(1.0), {8.0});
  const SvmModel b = svm_train(X, flipped, KernelSpec::rbf(1.0), {8.0});
  const Matrix probes = random_rows(rng, 30, 2, false);
  for (const auto& x : probes) {
    const double da = a.decision_values(x)[0];
    const double db = b.decision_values(x)[0];
    EXPECT_NEAR(da, -db, 5e-3);
    if (std::abs(da) > 1e-2) EXPECT_NE(a.predict(x), b.predict(x));
  }
}

TEST(Svm, StratifiedFoldsBalanceClasses) {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 10; ++i) labels.push_back(c);
  const auto folds = stratified_folds(labels, 5, 3);
  for (int f = 0; f < 5; ++f)
    for (int c = 0; c < 3; ++c) {
      int count = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (folds[i] == f && labels[i] == c) ++count;
      EXPECT_EQ(count, 2);
    }
  EXPECT_EQ(folds, stratified_folds(labels, 5, 3));
}

TEST(Svm, Pow2Grid) {
  EXPECT_EQ(pow2_grid(-3, 7, 2), (std::vector<double>{0.125, 0.5, 2.0, 8.0, 32.0, 128.0}));
  EXPECT_EQ(pow2_grid(-7, 3).size(), 11u);
}

// --- forests ----------------------------------------------------------------

TEST(ForestCls, SeparableTrainingPointsAndProbabilitySums) {
  std::mt19937_64 rng(8);
  const Matrix X = random_rows(rng, 90, 4, false);
  std::vector<int> y(90);
  for (std::size_t i = 0; i < 90; ++i) y[i] = X[i][0] < -0.33 ? 0 : (X[i][0] < 0.33 ? 1 : 2);
  ForestParams p;
  p.trees = 25;
  p.seed = 4;
  const ForestCls f = rf_train_cls(X, y, 3, p);
  for (std::size_t i = 0; i < X.size(); ++i) EXPECT_EQ(f.predict(X[i]), y[i]);
  for (const auto& x : random_rows(rng, 200, 4, false)) {
    const auto prob = f.predict_proba(x);
    double s = 0.0;
    for (double v : prob) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(ForestCls, DepthOneTreeIsTheBestStump) {
  std::mt19937_64 rng(31);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 15; ++trial) {
    const std::size_t n = 12;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix X(n, Vector(1));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      X[i][0] = u(rng);
      y[i] = u(rng) < X[i][0] ? 1 : 0;
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;

    // Exhaustive stump oracle: weighted Gini over every cut between sorted values.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return X[a][0] < X[b][0]; });
    const auto gini = [&](std::size_t lo, std::size_t hi) {
      double ones = 0;
      for (std::size_t k = lo; k < hi; ++k) ones += y[order[k]];
      const double m = static_cast<double>(hi - lo), p = ones / m;
      return m * (1.0 - p * p - (1 - p) * (1 - p));
    };
    std::vector<double> impurity;
    for (std::size_t cut = 1; cut < n; ++cut) impurity.push_back(gini(0, cut) + gini(cut, n));
    std::vector<double> sorted = impurity;
    std::sort(sorted.begin(), sorted.end());
    if (sorted[1] - sorted[0] < 1e-9) continue;  // ambiguous optimum
    const std::size_t cut =
        1 + static_cast<std::size_t>(std::min_element(impurity.begin(), impurity.end()) - impurity.begin());
    const auto leaf_p1 = [&](std::size_t lo, std::size_t hi) {
      double ones = 0;
      for (std::size_t k = lo; k < hi; ++k) ones += y[order[k]];
      return ones / static_cast<double>(hi - lo);
    };

    ForestParams p;
    p.trees = 1;
    p.max_depth = 1;
    p.bootstrap = false;
    p.seed = 2;
    const ForestCls f = rf_train_cls(X, y, 2, p);
    for (std::size_t k = 0; k < n; ++k) {
      const double expect = k < cut ? leaf_p1(0, cut) : leaf_p1(cut, n);
      EXPECT_NEAR(f.predict_proba(X[order[k]])[1], expect, 1e-12);
    }
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

TEST(ForestCls, ArgmaxInvariantToMonotoneFeatureTransform) {
  std::mt19937_64 rng(12);
  Matrix X = random_rows(rng, 80, 3, false);
  std::vector<int> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = X[i][1] * X[i][2] > 0.0 ? 1 : 0;
  Matrix Z = X;
  for (auto& r : Z) r[1] = std::exp(3.0 * r[1]) - 7.0;
  ForestParams p;
  p.trees = 15;
  p.seed = 6;
  p.bootstrap = false;  // out-of-sample points may fall between split values
  const ForestCls a = rf_train_cls(X, y, 2, p);
  const ForestCls b = rf_train_cls(Z, y, 2, p);
  for (std::size_t i = 0; i < X.size(); ++i) {
    EXPECT_EQ(a.predict(X[i]), b.predict(Z[i]));
    EXPECT_EQ(a.predict_proba(X[i]), b.predict_proba(Z[i]));
  }
}

TEST(ForestCls, EmptyTrainingSetIsRejected) {
  EXPECT_THROW(rf_train_cls(Matrix{}, std::vector<int>{}, 2, {}), Error);
}

TEST(ForestReg, ConstantTargets) {
  std::mt19937_64 rng(3);
  const Matrix X = random_rows(rng, 40, 5, false);
  const std::vector<std::array<double, 2>> t(40, {0.25, 1.5});
  const ForestReg f = rf_train_reg(X, t, regression_defaults(10, 2));
  for (const auto& x : random_rows(rng, 20, 5, false))
    EXPECT_EQ(f.predict(x), (std::array<double, 2>{0.25, 1.5}));
}

TEST(ForestReg, PredictionsInsideTargetRange) {
  std::mt19937_64 rng(13);
  const Matrix X = random_rows(rng, 60, 4, false);
  std::vector<std::array<double, 2>> t(60);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (auto& v : t) v = {u(rng), u(rng)};
  double lo0 = 1e9, hi0 = -1e9, lo1 = 1e9, hi1 = -1e9;
  for (const auto& v : t) {
    lo0 = std::min(lo0, v[0]);
    hi0 = std::max(hi0, v[0]);
    lo1 = std::min(lo1, v[1]);
    hi1 = std::max(hi1, v[1]);
  }
  const ForestReg f = rf_train_reg(X, t, regression_defaults(12, 5));
  for (const auto& x : random_rows(rng, 50, 4, false)) {
    const auto p = f.predict(x);
    EXPECT_GE(p[0], lo0 - 1e-12);
    EXPECT_LE(p[0], hi0 + 1e-12);
    EXPECT_GE(p[1], lo1 - 1e-12);
    EXPECT_LE(p[1], hi1 + 1e-12);
  }
}

TEST(ForestReg, MinLeafOfWholeSetGivesGlobalMean) {
  std::mt19937_64 rng(21);
  const Matrix X = random_rows(rng, 15, 3, false);
  std::vector<std::array<double, 2>> t(15);
  std::array<double, 2> mean{0.0, 0.0};
  for (std::size_t i = 0; i < 15; ++i) {
    t[i] = {0.1 * static_cast<double>(i), 2.0 - 0.05 * static_cast<double>(i)};
    mean[0] += t[i][0] / 15.0;
    mean[1] += t[i][1] / 15.0;
  }
  ForestParams p = regression_defaults(1, 1);
  p.min_leaf = 15;
  p.bootstrap = false;
  const ForestReg f = rf_train_reg(X, t, p);
  const auto pred = f.predict(X[3]);
  EXPECT_NEAR(pred[0], mean[0], 1e-12);
  EXPECT_NEAR(pred[1], mean[1], 1e-12);
}

// --- HMM --------------------------------------------------------------------

TEST(Hmm, SingleStateSingleMixtureIsClosedFormMle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(1.0, 2.0);
  std::vector<Matrix> seqs(4);
  Vector mean(3, 0.0), var(3, 0.0);
  std::size_t total = 0;
  for (auto& s : seqs) {
    s = Matrix(10, Vector(3));
    for (auto& r : s)
      for (double& v : r) v = g(rng);
    total += s.size();
  }
  for (const auto& s : seqs)
    for (const auto& r : s)
      for (std::size_t d = 0; d < 3; ++d) mean[d] += r[d] / static_cast<double>(total);
  for (const auto& s : seqs)
    for (const auto& r : s)
      for (std::size_t d = 0; d < 3; ++d) var[d] += (r[d] - mean[d]) * (r[d] - mean[d]) / static_cast<double>(total);
  HmmParams p;
  p.states = 1;
  p.mixtures = 1;
  const HmmModel m = hmm_train(seqs, p, 1);
  ASSERT_EQ(m.num_states(), 1u);
  for (std::size_t d = 0; d < 3; ++d) {
    EXPECT_NEAR(m.states[0].means[0][d], mean[d], 1e-9);
    EXPECT_NEAR(m.states[0].variances[0][d], var[d], 1e-9);
  }
}

TEST(Hmm, EmLogLikelihoodNeverDecreases) {
  for (std::uint64_t run = 0; run < 8; ++run) {
    std::mt19937_64 rng(100 + run);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Matrix> seqs;
    for (int s = 0; s < 5; ++s) {
      Matrix seq;
      for (int seg = 0; seg < 3; ++seg)
        for (int t = 0; t < 8; ++t) seq.push_back({3.0 * seg + g(rng), -2.0 * seg + g(rng)});
      seqs.push_back(seq);
    }
    HmmParams p;
    p.mixtures = 2;
    p.max_iterations = 15;
    p.tolerance = 0.0;
    const HmmModel m = hmm_train(seqs, p, run);
    ASSERT_GE(m.log_likelihoods.size(), 2u);
    for (std::size_t i = 1; i < m.log_likelihoods.size(); ++i)
      EXPECT_GE(m.log_likelihoods[i], m.log_likelihoods[i - 1] - 1e-9 * std::abs(m.log_likelihoods[i - 1]))
          << "run " << run << " iteration " << i;
    for (std::size_t s = 0; s < m.num_states(); ++s) {
      const Vector row = m.transition_row(s);
      double sum = 0.0;
      for (double v : row) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      double w = 0.0;
      for (double v : m.states[s].weights) w += v;
      EXPECT_NEAR(w, 1.0, 1e-9);
      for (const auto& var : m.states[s].variances)
        for (double v : var) EXPECT_GE(v, 1e-6);
    }
  }
}

TEST(Hmm, TrainingIsDeterministicAndRejectsShortSequences) {
  std::mt19937_64 rng(7);
  std::vector<Matrix> seqs;
  for (int s = 0; s < 3; ++s) seqs.push_back(random_rows(rng, 12, 2, false));
  HmmParams p;
  p.mixtures = 2;
  const HmmModel a = hmm_train(seqs, p, 5);
  const HmmModel b = hmm_train(seqs, p, 5);
  nlohmann::json ja = a, jb = b;
  EXPECT_EQ(ja, jb);
  seqs.push_back(random_rows(rng, 2, 2, false));
  try {
    hmm_train(seqs, p, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_argument);
  }
}

TEST(Viterbi, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t K = 1 + static_cast<std::size_t>(instance % 2);
    const std::size_t T = 1 + static_cast<std::size_t>(rng() % 8);
    std::vector<HmmModel> models;
    for (std::size_t k = 0; k < K; ++k) models.push_back(random_hmm(rng, 1 + rng() % 2));
    std::vector<const HmmModel*> ptrs;
    std::vector<Matrix> emissions;
    for (const auto& m : models) {
      ptrs.push_back(&m);
      Matrix e(T, Vector(m.num_states()));
      for (auto& r : e)
        for (double& v : r) v = g(rng);
      emissions.push_back(e);
    }
    const DecodeResult got = viterbi_network(ptrs, emissions);
    const aed_test::BrutePath want = aed_test::brute_force_viterbi(ptrs, emissions);
    EXPECT_EQ(got.path, want.path) << "instance " << instance;
    EXPECT_NEAR(got.log_score, want.score, 1e-9);
  }
}

TEST(Viterbi, DominantModelGivesOneRun) {
  std::mt19937_64 rng(1);
  HmmModel a = random_hmm(rng, 3), b = random_hmm(rng, 3);
  a.self = {0.9, 0.9, 0.9};
  b.self = {0.9, 0.9, 0.9};
  const std::size_t T = 40;
  Matrix ea(T, Vector(3, -50.0)), eb(T, Vector(3, -1.0));
  const DecodeResult r = viterbi_network({&a, &b}, {ea, eb});
  ASSERT_EQ(r.runs.size(), 1u);
  EXPECT_EQ(r.runs[0].model, 1);
  EXPECT_EQ(r.runs[0].begin, 0u);
  EXPECT_EQ(r.runs[0].end, T);
}

TEST(Viterbi, InvariantToCommonShift) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 3.0);
  HmmModel a = random_hmm(rng, 3), b = random_hmm(rng, 2), c = random_hmm(rng, 1);
  std::vector<const HmmModel*> ptrs{&a, &b, &c};
  std::vector<Matrix> em, shifted;
  for (const auto* m : ptrs) {
    Matrix e(60, Vector(m->num_states()));
    for (auto& r : e)
      for (double& v : r) v = g(rng);
    em.push_back(e);
    for (auto& r : e)
      for (double& v : r) v -= 123.0;
    shifted.push_back(e);
  }
  EXPECT_EQ(viterbi_network(ptrs, em).path, viterbi_network(ptrs, shifted).path);
}

TEST(Viterbi, EmptyFramesAreRejected) {
  std::mt19937_64 rng(1);
  HmmModel a = random_hmm(rng, 2);
  EXPECT_THROW(viterbi_network({&a}, {Matrix{}}), Error);
}

TEST(Viterbi, RunToSecondsCoversCentreHops) {
  const auto [on, off] = run_to_seconds(0, 10, 0.02, 0.01, 5.0);
  EXPECT_NEAR(on, 0.005, 1e-12);
  EXPECT_NEAR(off, 0.105, 1e-12);
  const auto [on2, off2] = run_to_seconds(5, 8, 0.02, 0.01, 5.0);
  const auto [on3, off3] = run_to_seconds(0, 4, 0.01, 0.02, 0.05);
  EXPECT_EQ(on3, 0.0);
  EXPECT_EQ(off3, 0.05);
  EXPECT_NEAR(on2, 0.055, 1e-12);
  EXPECT_NEAR(off2, 0.085, 1e-12);
}

// --- serialization ----------------------------------------------------------

TEST(Serialization, LearnersRoundTrip) {
  std::mt19937_64 rng(9);
  const Matrix X = random_rows(rng, 30, 3, false);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = static_cast<int>(i % 3);

  ForestParams p;
  p.trees = 3;
  const ForestCls forest = rf_train_cls(X, y, 3, p);
  const SvmModel svm = svm_train(X, y, KernelSpec::rbf(0.3), {2.0});
  const Codebook cb = kmeans_fit(X, 4, 1);
  HmmParams hp;
  hp.mixtures = 2;
  const HmmModel hmm = hmm_train({X, X}, hp, 1);

  const nlohmann::json jf = forest, js = svm, jc = cb, jh = hmm;
  EXPECT_EQ(nlohmann::json(jf.get<ForestCls>()), jf);
  EXPECT_EQ(nlohmann::json(js.get<SvmModel>()), js);
  EXPECT_EQ(nlohmann::json(jc.get<Codebook>()), jc);
  EXPECT_EQ(nlohmann::json(jh.get<HmmModel>()), jh);

  const ForestCls f2 = nlohmann::json::parse(dump_json(jf)).get<ForestCls>();
  const SvmModel s2 = nlohmann::json::parse(dump_json(js)).get<SvmModel>();
  for (const auto& x : random_rows(rng, 20, 3, false)) {
    EXPECT_EQ(f2.predict_proba(x), forest.predict_proba(x));
    EXPECT_EQ(s2.decision_values(x), svm.decision_values(x));
  }
}

TEST(Serialization, ContainerChecksKindAndVersion) {
  const auto c = wrap_model("codebook", nlohmann::json::object());
  EXPECT_EQ(container_kind(c), "codebook");
  EXPECT_NO_THROW(unwrap_model(c, "codebook"));
  EXPECT_THROW(unwrap_model(c, "svm"), Error);
  auto bad = c;
  bad["format_version"] = 99;
  EXPECT_THROW(unwrap_model(bad, "codebook"), Error);
}
