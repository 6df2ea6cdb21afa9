#include <benchmark/benchmark.h>

#include <random>

#include "aed/detectors/common.hpp"
#include "aed/features.hpp"
#include "aed/learners/forest.hpp"
#include "aed/learners/hmm.hpp"
#include "aed/learners/kernels.hpp"
#include "aed/learners/svm.hpp"

using namespace aed;

namespace {

std::vector<double> noise(double seconds) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> x(static_cast<std::size_t>(seconds * kSampleRate));
  for (double& v : x) v = g(rng);
  return x;
}

Matrix random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix X(n, Vector(d));
  for (auto& r : X)
    for (double& v : r) v = u(rng);
  return X;
}

void BM_Frames60(benchmark::State& state) {
  const auto x = noise(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_frames60(x));
  state.SetLabel(std::to_string(state.range(0)) + " s of audio");
}
BENCHMARK(BM_Frames60)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_Mfcc(benchmark::State& state) {
  const auto x = noise(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_mfcc(x));
}
BENCHMARK(BM_Mfcc)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_SegmentGrid(benchmark::State& state) {
  const auto x = noise(static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(describe_grid(x, SegmentGrid{}));
}
BENCHMARK(BM_SegmentGrid)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ForestTrain(benchmark::State& state) {
  const Matrix X = random_rows(static_cast<std::size_t>(state.range(0)), 120, 2);
  std::vector<int> y(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) y[i] = X[i][0] + X[i][1] > 0 ? 1 : 0;
  ForestParams p;
  p.trees = 10;
  for (auto _ : state) benchmark::DoNotOptimize(rf_train_cls(X, y, 2, p));
}
BENCHMARK(BM_ForestTrain)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ForestPredict(benchmark::State& state) {
  const Matrix X = random_rows(2000, 120, 3);
  std::vector<int> y(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) y[i] = X[i][0] > 0 ? 1 : 0;
  ForestParams p;
  p.trees = 30;
  const ForestCls f = rf_train_cls(X, y, 2, p);
  for (auto _ : state)
    for (const auto& x : X) benchmark::DoNotOptimize(f.predict_proba(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(X.size()));
}
BENCHMARK(BM_ForestPredict)->Unit(benchmark::kMillisecond);

void BM_Viterbi(benchmark::State& state) {
  const std::size_t T = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<HmmModel> models(6);
  for (auto& m : models)
    for (int s = 0; s < 3; ++s) {
      m.self.push_back(0.9);
      DiagGmm gmm;
      gmm.weights = {1.0};
      gmm.means = {{0.0}};
      gmm.variances = {{1.0}};
      m.states.push_back(gmm);
    }
  std::vector<const HmmModel*> ptrs;
  std::vector<Matrix> em;
  for (const auto& m : models) {
    ptrs.push_back(&m);
    Matrix e(T, Vector(m.num_states()));
    for (auto& r : e)
      for (double& v : r) v = g(rng);
    em.push_back(std::move(e));
  }
  for (auto _ : state) benchmark::DoNotOptimize(viterbi_network(ptrs, em));
}
BENCHMARK(BM_Viterbi)->Arg(12000)->Unit(benchmark::kMillisecond);

void BM_Smo(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Matrix X = random_rows(n, 10, 5);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = X[i][0] + 0.3 * X[i][1] > 0 ? 1 : -1;
  const Matrix G = gram_matrix(X, KernelSpec::rbf(0.5));
  std::vector<std::size_t> index(n);
  for (std::size_t i = 0; i < n; ++i) index[i] = i;
  for (auto _ : state) benchmark::DoNotOptimize(smo_solve(G, index, y, {10.0, 1e-3}));
}
BENCHMARK(BM_Smo)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
