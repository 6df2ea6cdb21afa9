#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "aed/types.hpp"

namespace aed {

struct ForestParams {
  int trees = 200;
  int mtry = 0;        // candidate features per split; 0 = library default
  int min_leaf = 1;    // minimum samples in each child of a split
  int max_depth = std::numeric_limits<int>::max();
  bool bootstrap = true;
  std::uint64_t seed = 1;
};

/// Flat binary tree; a node is a leaf when feature < 0.
struct Tree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    int value = 0;           // offset into `values` for leaves
  };
  std::vector<Node> nodes;
  std::vector<double> values;
  int value_dim = 0;

  /// Leaf payload reached by x.
  std::span<const double> leaf(std::span<const double> x) const;
  int depth() const;
};

/// Classification forest: Gini splits over sqrt(D) candidate features,
/// grown until pure (or min_leaf / max_depth); leaves hold class
/// distributions.
struct ForestCls {
  int n_classes = 0;
  int n_features = 0;
  std::vector<Tree> trees;

  std::vector<double> predict_proba(std::span<const double> x) const;
  int predict(std::span<const double> x) const;
};

/// Regression forest over 2-vectors (d_on, d_off): variance-reduction
/// splits over D/3 candidate features, default min_leaf 5.
struct ForestReg {
  int n_features = 0;
  std::vector<Tree> trees;

  std::array<double, 2> predict(std::span<const double> x) const;
};

/// `y` holds class indices in [0, n_classes).
ForestCls rf_train_cls(const Matrix& X, std::span<const int> y, int n_classes,
                       const ForestParams& params);

ForestReg rf_train_reg(const Matrix& X, std::span<const std::array<double, 2>> targets,
                       const ForestParams& params);

/// Regression defaults (min_leaf 5).
ForestParams regression_defaults(int trees, std::uint64_t seed);

}  // namespace aed
