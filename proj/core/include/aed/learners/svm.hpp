#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "aed/learners/kernels.hpp"
#include "aed/types.hpp"

namespace aed {

struct SvmParams {
  double c_reg = 1.0;
  double tolerance = 1e-3;  // KKT violation gap at which SMO stops
  long max_iterations = 10'000'000;
};

/// Solution of one binary soft-margin dual:
///   max sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
///   s.t. 0 <= alpha_i <= C, sum alpha_i y_i = 0.
struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;       // f(x) = sum alpha_i y_i K(x_i, x) + bias
  double objective = 0.0;  // dual objective value (maximisation form)
  long iterations = 0;
};

/// SMO with maximal-violating-pair working set selection. `index` selects
/// rows/columns of `gram`; `y` holds +1/-1 per selected sample.
DualSolution smo_solve(const Matrix& gram, std::span<const std::size_t> index,
                       std::span<const int> y, const SvmParams& params);

/// Dual objective of `alpha` on the selected sub-problem.
double dual_objective(const Matrix& gram, std::span<const std::size_t> index,
                      std::span<const int> y, std::span<const double> alpha);

/// Binary machine separating classes[pos] (+1) from classes[neg] (-1).
/// Support vectors are indices into the caller's sample space.
struct PairMachine {
  int pos = 0;
  int neg = 0;
  std::vector<std::size_t> sv;
  std::vector<double> coef;  // alpha_i * y_i
  double bias = 0.0;
};

/// Trains one machine per unordered pair of the classes present in `index`.
/// `labels` are class indices in [0, n_classes).
std::vector<PairMachine> train_pairwise(const Matrix& gram, std::span<const int> labels,
                                        std::span<const std::size_t> index, int n_classes,
                                        const SvmParams& params);

/// Pairwise voting; ties go to the class with the larger summed margin.
/// `kernel_to(sv)` returns K(x_sv, x) for the sample being classified.
int vote(const std::vector<PairMachine>& machines, int n_classes,
         const std::function<double(std::size_t)>& kernel_to);

/// Trained one-vs-one classifier owning its support vectors.
struct SvmModel {
  KernelSpec kernel;
  std::vector<int> classes;      // original label values
  Matrix support;                // pooled support vectors
  std::vector<PairMachine> machines;  // sv index into `support`, pos/neg index into `classes`
  double c_reg = 1.0;

  int predict(std::span<const double> x) const;
  /// Decision value of every machine, in `machines` order.
  std::vector<double> decision_values(std::span<const double> x) const;
};

/// Trains on X with labels y (any integer values, >= 2 distinct).
SvmModel svm_train(const Matrix& X, std::span<const int> y, const KernelSpec& kernel,
                   const SvmParams& params);

/// Same, reusing a precomputed Gram matrix of X under `kernel`.
SvmModel svm_train_gram(const Matrix& X, const Matrix& gram, std::span<const int> y,
                        const KernelSpec& kernel, const SvmParams& params);

/// Stratified fold ids in [0, folds) for `labels`, shuffled by `seed`.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// k-fold accuracy of one-vs-one SVMs trained from `gram`.
double cv_accuracy(const Matrix& gram, std::span<const int> labels, const SvmParams& params,
                   std::span<const int> fold_of);

/// Powers of two 2^lo .. 2^hi in steps of `step` in the exponent.
std::vector<double> pow2_grid(int lo, int hi, int step = 1);

struct SvmSelection {
  double c_reg = 1.0;
  double gamma = 0.0;  // rbf only
  double accuracy = 0.0;
  std::size_t candidates = 0;
};

/// Picks C (and gamma for rbf) by k-fold CV accuracy; the first best
/// candidate in grid order wins ties.
SvmSelection select_rbf(const Matrix& X, std::span<const int> y, std::span<const double> c_grid,
                        std::span<const double> gamma_grid, int folds, std::uint64_t seed,
                        double tolerance = 1e-3);
SvmSelection select_c(const Matrix& gram, std::span<const int> y, std::span<const double> c_grid,
                      int folds, std::uint64_t seed, double tolerance = 1e-3);

}  // namespace aed
