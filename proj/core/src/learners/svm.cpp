#include "aed/learners/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "aed/detmath.hpp"
#include "aed/error.hpp"
#include "aed/learners/kmeans.hpp"

namespace aed {
namespace {

constexpr double kTau = 1e-12;

struct SubProblem {
  const Matrix& gram;
  std::span<const std::size_t> index;
  std::span<const int> y;

  double q(std::size_t i, std::size_t j) const {
    return static_cast<double>(y[i] * y[j]) * gram[index[i]][index[j]];
  }
};

}  // namespace

DualSolution smo_solve(const Matrix& gram, std::span<const std::size_t> index,
                       std::span<const int> y, const SvmParams& params) {
  require(index.size() == y.size(), Errc::dimension_mismatch, "smo: index/label size mismatch");
  require(params.c_reg > 0.0, Errc::invalid_argument, "smo: C must be positive");
  const std::size_t n = index.size();
  const double c = params.c_reg;
  const SubProblem p{gram, index, y};

  DualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = p.q(i, i);

  auto in_up = [&](std::size_t t) {
    return (y[t] == 1 && sol.alpha[t] < c) || (y[t] == -1 && sol.alpha[t] > 0.0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] == 1 && sol.alpha[t] > 0.0) || (y[t] == -1 && sol.alpha[t] < c);
  };

  long iter = 0;
  for (; iter < params.max_iterations; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < params.tolerance) break;

    const double old_ai = sol.alpha[i];
    const double old_aj = sol.alpha[j];
    const double qij = p.q(i, j);
    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = sol.alpha[i] - sol.alpha[j];
      sol.alpha[i] += delta;
      sol.alpha[j] += delta;
      if (diff > 0.0) {
        if (sol.alpha[j] < 0.0) {
          sol.alpha[j] = 0.0;
          sol.alpha[i] = diff;
        }
      } else if (sol.alpha[i] < 0.0) {
        sol.alpha[i] = 0.0;
        sol.alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (sol.alpha[i] > c) {
          sol.alpha[i] = c;
          sol.alpha[j] = c - diff;
        }
      } else if (sol.alpha[j] > c) {
        sol.alpha[j] = c;
        sol.alpha[i] = c + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = sol.alpha[i] + sol.alpha[j];
      sol.alpha[i] -= delta;
      sol.alpha[j] += delta;
      if (sum > c) {
        if (sol.alpha[i] > c) {
          sol.alpha[i] = c;
          sol.alpha[j] = sum - c;
        }
      } else if (sol.alpha[j] < 0.0) {
        sol.alpha[j] = 0.0;
        sol.alpha[i] = sum;
      }
      if (sum > c) {
        if (sol.alpha[j] > c) {
          sol.alpha[j] = c;
          sol.alpha[i] = sum - c;
        }
      } else if (sol.alpha[i] < 0.0) {
        sol.alpha[i] = 0.0;
        sol.alpha[j] = sum;
      }
    }

    const double dai = sol.alpha[i] - old_ai;
    const double daj = sol.alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += p.q(t, i) * dai + p.q(t, j) * daj;
  }
  sol.iterations = iter;

  // Offset: average over free variables, else midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (sol.alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (sol.alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  double rho = 0.0;
  if (free_count > 0) rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
  else if (std::isfinite(ub)) rho = ub;
  else if (std::isfinite(lb)) rho = lb;
  sol.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += sol.alpha[t] * (grad[t] - 1.0);
  sol.objective = -0.5 * obj;
  return sol;
}

double dual_objective(const Matrix& gram, std::span<const std::size_t> index,
                      std::span<const int> y, std::span<const double> alpha) {
  const SubProblem p{gram, index, y};
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    linear += alpha[i];
    for (std::size_t j = 0; j < alpha.size(); ++j) quad += alpha[i] * alpha[j] * p.q(i, j);
  }
  return linear - 0.5 * quad;
}

std::vector<PairMachine> train_pairwise(const Matrix& gram, std::span<const int> labels,
                                        std::span<const std::size_t> index, int n_classes,
                                        const SvmParams& params) {
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_classes));
  for (std::size_t s : index) members[static_cast<std::size_t>(labels[s])].push_back(s);

  std::vector<PairMachine> machines;
  for (int a = 0; a < n_classes; ++a) {
    if (members[static_cast<std::size_t>(a)].empty()) continue;
    for (int b = a + 1; b < n_classes; ++b) {
      if (members[static_cast<std::size_t>(b)].empty()) continue;
      std::vector<std::size_t> idx = members[static_cast<std::size_t>(a)];
      idx.insert(idx.end(), members[static_cast<std::size_t>(b)].begin(),
                 members[static_cast<std::size_t>(b)].end());
      std::sort(idx.begin(), idx.end());
      std::vector<int> y(idx.size());
      for (std::size_t t = 0; t < idx.size(); ++t) y[t] = labels[idx[t]] == a ? 1 : -1;
      const DualSolution sol = smo_solve(gram, idx, y, params);
      PairMachine m;
      m.pos = a;
      m.neg = b;
      m.bias = sol.bias;
      for (std::size_t t = 0; t < idx.size(); ++t) {
        if (sol.alpha[t] <= 0.0) continue;
        m.sv.push_back(idx[t]);
        m.coef.push_back(sol.alpha[t] * y[t]);
      }
      machines.push_back(std::move(m));
    }
  }
  return machines;
}

int vote(const std::vector<PairMachine>& machines, int n_classes,
         const std::function<double(std::size_t)>& kernel_to) {
  require(!machines.empty(), Errc::missing_component, "svm has no trained machines");
  std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
  std::vector<double> margin(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<bool> present(static_cast<std::size_t>(n_classes), false);
  for (const auto& m : machines) {
    double f = m.bias;
    for (std::size_t t = 0; t < m.sv.size(); ++t) f += m.coef[t] * kernel_to(m.sv[t]);
    present[static_cast<std::size_t>(m.pos)] = present[static_cast<std::size_t>(m.neg)] = true;
    ++votes[static_cast<std::size_t>(f > 0.0 ? m.pos : m.neg)];
    margin[static_cast<std::size_t>(m.pos)] += f;
    margin[static_cast<std::size_t>(m.neg)] -= f;
  }
  int best = -1;
  for (int c = 0; c < n_classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    if (!present[i]) continue;
    if (best < 0 || votes[i] > votes[static_cast<std::size_t>(best)] ||
        (votes[i] == votes[static_cast<std::size_t>(best)] &&
         margin[i] > margin[static_cast<std::size_t>(best)]))
      best = c;
  }
  return best;
}

int SvmModel::predict(std::span<const double> x) const {
  std::vector<double> k(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) k[s] = kernel(support[s], x);
  const int idx = vote(machines, static_cast<int>(classes.size()),
                       [&](std::size_t sv) { return k[sv]; });
  return classes[static_cast<std::size_t>(idx)];
}

std::vector<double> SvmModel::decision_values(std::span<const double> x) const {
  std::vector<double> k(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) k[s] = kernel(support[s], x);
  std::vector<double> out;
  for (const auto& m : machines) {
    double f = m.bias;
    for (std::size_t t = 0; t < m.sv.size(); ++t) f += m.coef[t] * k[m.sv[t]];
    out.push_back(f);
  }
  return out;
}

SvmModel svm_train_gram(const Matrix& X, const Matrix& gram, std::span<const int> y,
                        const KernelSpec& kernel, const SvmParams& params) {
  require(X.size() == y.size() && gram.size() == X.size(), Errc::dimension_mismatch,
          "svm_train: sample/label count mismatch");
  SvmModel model;
  model.kernel = kernel;
  model.c_reg = params.c_reg;
  model.classes.assign(y.begin(), y.end());
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2)
    fail(Errc::invalid_argument, "svm_train: need at least two distinct classes");

  std::vector<int> labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    labels[i] = static_cast<int>(
        std::lower_bound(model.classes.begin(), model.classes.end(), y[i]) - model.classes.begin());
  std::vector<std::size_t> all(X.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  model.machines =
      train_pairwise(gram, labels, all, static_cast<int>(model.classes.size()), params);

  std::map<std::size_t, std::size_t> pool;
  for (auto& m : model.machines)
    for (auto& sv : m.sv) {
      auto [it, inserted] = pool.emplace(sv, model.support.size());
      if (inserted) model.support.push_back(X[sv]);
      sv = it->second;
    }
  return model;
}

SvmModel svm_train(const Matrix& X, std::span<const int> y, const KernelSpec& kernel,
                   const SvmParams& params) {
  return svm_train_gram(X, gram_matrix(X, kernel), y, kernel, params);
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  require(folds >= 2, Errc::config, "cross-validation needs at least two folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  detmath::Rng rng(seed);
  std::vector<int> fold(labels.size(), 0);
  int next = 0;
  for (auto& [label, members] : by_class) {
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[rng.below(i)]);
    for (std::size_t s : members) {
      fold[s] = next;
      next = (next + 1) % folds;
    }
  }
  return fold;
}

double cv_accuracy(const Matrix& gram, std::span<const int> labels, const SvmParams& params,
                   std::span<const int> fold_of) {
  const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  std::size_t correct = 0, total = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
    if (test.empty()) continue;
    const auto machines = train_pairwise(gram, labels, train, n_classes, params);
    for (std::size_t t : test) {
      ++total;
      if (machines.empty()) continue;
      const int pred = vote(machines, n_classes, [&](std::size_t sv) { return gram[sv][t]; });
      if (pred == labels[t]) ++correct;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::vector<double> pow2_grid(int lo, int hi, int step) {
  std::vector<double> out;
  for (int e = lo; e <= hi; e += step) out.push_back(std::ldexp(1.0, e));
  return out;
}

namespace {

std::vector<int> dense_labels(std::span<const int> y) {
  std::vector<int> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), y[i]) -
                              classes.begin());
  return out;
}

}  // namespace

SvmSelection select_c(const Matrix& gram, std::span<const int> y, std::span<const double> c_grid,
                      int folds, std::uint64_t seed, double tolerance) {
  const auto labels = dense_labels(y);
  const auto fold_of = stratified_folds(labels, folds, seed);
  SvmSelection best;
  best.accuracy = -1.0;
  for (double c : c_grid) {
    SvmParams p;
    p.c_reg = c;
    p.tolerance = tolerance;
    const double acc = cv_accuracy(gram, labels, p, fold_of);
    ++best.candidates;
    if (acc > best.accuracy) {
      best.accuracy = acc;
      best.c_reg = c;
    }
  }
  return best;
}

SvmSelection select_rbf(const Matrix& X, std::span<const int> y, std::span<const double> c_grid,
                        std::span<const double> gamma_grid, int folds, std::uint64_t seed,
                        double tolerance) {
  const std::size_t n = X.size();
  Matrix dist(n, Vector(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = squared_distance(X[i], X[j]);

  SvmSelection best;
  best.accuracy = -1.0;
  Matrix gram(n, Vector(n));
  for (double gamma : gamma_grid) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) gram[i][j] = std::exp(-gamma * dist[i][j]);
    const SvmSelection s = select_c(gram, y, c_grid, folds, seed, tolerance);
    best.candidates += s.candidates;
    if (s.accuracy > best.accuracy) {
      best.accuracy = s.accuracy;
      best.c_reg = s.c_reg;
      best.gamma = gamma;
    }
  }
  return best;
}

}  // namespace aed
