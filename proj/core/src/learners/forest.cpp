#include "aed/learners/forest.hpp"

#include <algorithm>
#include <cmath>

#include "aed/detmath.hpp"
#include "aed/error.hpp"

namespace aed {
namespace {

// Both criteria reduce to maximising sum_child |S_child|^2 / n_child, where
// S is the per-channel sum of the sample payloads: one-hot class indicators
// for Gini, target values for squared error.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Matrix& payload, int mtry, int min_leaf, int max_depth,
              bool classification, std::uint64_t seed)
      : X_(X),
        payload_(payload),
        dim_(payload.front().size()),
        mtry_(mtry),
        min_leaf_(static_cast<std::size_t>(std::max(1, min_leaf))),
        max_depth_(max_depth),
        classification_(classification),
        rng_(seed) {}

  Tree build(std::vector<std::size_t> samples) {
    Tree tree;
    tree.value_dim = static_cast<int>(dim_);
    samples_ = std::move(samples);
    struct Task {
      int node;
      std::size_t begin, end;
      int depth;
    };
    tree.nodes.emplace_back();
    std::vector<Task> stack{{0, 0, samples_.size(), 0}};
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      Split split;
      if (task.depth < max_depth_ && !is_pure(task.begin, task.end) &&
          task.end - task.begin >= 2 * min_leaf_)
        split = find_split(task.begin, task.end);
      if (split.feature < 0) {
        make_leaf(tree, task.node, task.begin, task.end);
        continue;
      }
      const auto mid = std::partition(
          samples_.begin() + static_cast<std::ptrdiff_t>(task.begin),
          samples_.begin() + static_cast<std::ptrdiff_t>(task.end),
          [&](std::size_t s) { return X_[s][static_cast<std::size_t>(split.feature)] <= split.threshold; });
      const auto cut = static_cast<std::size_t>(mid - samples_.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const int right = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(task.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left;
      node.right = right;
      stack.push_back({right, cut, task.end, task.depth + 1});
      stack.push_back({left, task.begin, cut, task.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = -1.0;
  };

  bool is_pure(std::size_t begin, std::size_t end) const {
    const auto& first = payload_[samples_[begin]];
    for (std::size_t i = begin + 1; i < end; ++i)
      if (payload_[samples_[i]] != first) return false;
    return true;
  }

  void make_leaf(Tree& tree, int node, std::size_t begin, std::size_t end) {
    std::vector<double> mean(dim_, 0.0);
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t k = 0; k < dim_; ++k) mean[k] += payload_[samples_[i]][k];
    const auto n = static_cast<double>(end - begin);
    for (double& v : mean) v /= n;
    auto& leaf = tree.nodes[static_cast<std::size_t>(node)];
    leaf.feature = -1;
    leaf.value = static_cast<int>(tree.values.size());
    tree.values.insert(tree.values.end(), mean.begin(), mean.end());
  }

  Split find_split(std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::size_t n_features = X_.front().size();
    std::vector<double> total(dim_, 0.0);
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t k = 0; k < dim_; ++k) total[k] += payload_[samples_[i]][k];

    features_.resize(n_features);
    for (std::size_t f = 0; f < n_features; ++f) features_[f] = f;

    Split best;
    int evaluated = 0;
    std::vector<double> left(dim_), right(dim_);
    for (std::size_t drawn = 0; drawn < n_features && evaluated < mtry_; ++drawn) {
      std::swap(features_[drawn], features_[drawn + rng_.below(n_features - drawn)]);
      const std::size_t f = features_[drawn];

      order_.clear();
      for (std::size_t i = begin; i < end; ++i) order_.emplace_back(X_[samples_[i]][f], samples_[i]);
      std::sort(order_.begin(), order_.end());
      if (order_.front().first == order_.back().first) continue;  // constant here
      ++evaluated;

      std::fill(left.begin(), left.end(), 0.0);
      right = total;
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (double v : total) right_sq += v * v;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto& p = payload_[order_[i].second];
        for (std::size_t k = 0; k < dim_; ++k) {
          if (p[k] == 0.0) continue;
          left_sq += p[k] * (2.0 * left[k] + p[k]);
          right_sq += p[k] * (p[k] - 2.0 * right[k]);
          left[k] += p[k];
          right[k] -= p[k];
        }
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf_ || n - n_left < min_leaf_) continue;
        const double lo = order_[i].first;
        const double hi = order_[i + 1].first;
        if (lo == hi) continue;
        const double score = left_sq / static_cast<double>(n_left) +
                             right_sq / static_cast<double>(n - n_left);
        if (score > best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          double mid = 0.5 * (lo + hi);
          if (!(mid < hi)) mid = lo;
          best.threshold = mid;
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  const Matrix& payload_;
  std::size_t dim_;
  int mtry_;
  std::size_t min_leaf_;
  int max_depth_;
  bool classification_;
  detmath::Rng rng_;
  std::vector<std::size_t> samples_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, std::size_t>> order_;
};

std::vector<std::size_t> draw_samples(std::size_t n, bool bootstrap, std::uint64_t seed) {
  std::vector<std::size_t> out(n);
  if (!bootstrap) {
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  detmath::Rng rng(seed);
  for (auto& s : out) s = rng.below(n);
  return out;
}

void check_features(const Matrix& X) {
  if (X.empty()) fail(Errc::empty_input, "random forest: empty training set");
  const std::size_t d = X.front().size();
  require(d > 0, Errc::invalid_argument, "random forest: zero-dimensional features");
  for (const auto& x : X)
    require(x.size() == d, Errc::dimension_mismatch, "random forest: ragged feature matrix");
}

}  // namespace

std::span<const double> Tree::leaf(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return std::span<const double>(values).subspan(static_cast<std::size_t>(nodes[i].value),
                                                 static_cast<std::size_t>(value_dim));
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].feature < 0) continue;
    d[static_cast<std::size_t>(nodes[i].left)] = d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

std::vector<double> ForestCls::predict_proba(std::span<const double> x) const {
  require(!trees.empty(), Errc::missing_component, "classification forest is untrained");
  require(static_cast<int>(x.size()) == n_features, Errc::dimension_mismatch,
          "classification forest: feature dimension mismatch");
  std::vector<double> p(static_cast<std::size_t>(n_classes), 0.0);
  for (const auto& t : trees) {
    const auto leaf = t.leaf(x);
    for (std::size_t c = 0; c < p.size(); ++c) p[c] += leaf[c];
  }
  double sum = 0.0;
  for (double& v : p) {
    v /= static_cast<double>(trees.size());
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

int ForestCls::predict(std::span<const double> x) const {
  const auto p = predict_proba(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::array<double, 2> ForestReg::predict(std::span<const double> x) const {
  require(!trees.empty(), Errc::missing_component, "regression forest is untrained");
  require(static_cast<int>(x.size()) == n_features, Errc::dimension_mismatch,
          "regression forest: feature dimension mismatch");
  std::array<double, 2> out{0.0, 0.0};
  for (const auto& t : trees) {
    const auto leaf = t.leaf(x);
    out[0] += leaf[0];
    out[1] += leaf[1];
  }
  out[0] /= static_cast<double>(trees.size());
  out[1] /= static_cast<double>(trees.size());
  return out;
}

ForestCls rf_train_cls(const Matrix& X, std::span<const int> y, int n_classes,
                       const ForestParams& params) {
  check_features(X);
  require(X.size() == y.size(), Errc::dimension_mismatch, "random forest: label count mismatch");
  require(n_classes >= 2, Errc::invalid_argument, "classification forest needs >= 2 classes");
  require(params.trees >= 1, Errc::config, "random forest needs at least one tree");
  Matrix payload(X.size(), Vector(static_cast<std::size_t>(n_classes), 0.0));
  for (std::size_t i = 0; i < y.size(); ++i) {
    require(y[i] >= 0 && y[i] < n_classes, Errc::invalid_argument, "class index out of range");
    payload[i][static_cast<std::size_t>(y[i])] = 1.0;
  }
  const int d = static_cast<int>(X.front().size());
  const int mtry = params.mtry > 0 ? params.mtry
                                   : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(d))));
  ForestCls forest;
  forest.n_classes = n_classes;
  forest.n_features = d;
  for (int t = 0; t < params.trees; ++t) {
    const std::uint64_t seed = detmath::mix_seed(params.seed, static_cast<std::uint64_t>(t));
    TreeBuilder builder(X, payload, mtry, params.min_leaf, params.max_depth, true,
                        detmath::mix_seed(seed, 1));
    forest.trees.push_back(builder.build(draw_samples(X.size(), params.bootstrap, seed)));
  }
  return forest;
}

ForestReg rf_train_reg(const Matrix& X, std::span<const std::array<double, 2>> targets,
                       const ForestParams& params) {
  check_features(X);
  require(X.size() == targets.size(), Errc::dimension_mismatch,
          "regression forest: target count mismatch");
  require(params.trees >= 1, Errc::config, "random forest needs at least one tree");
  Matrix payload(X.size(), Vector(2));
  for (std::size_t i = 0; i < targets.size(); ++i) {
    require(targets[i][0] >= 0.0 && targets[i][1] >= 0.0, Errc::invalid_argument,
            "regression targets must be non-negative");
    payload[i] = {targets[i][0], targets[i][1]};
  }
  const int d = static_cast<int>(X.front().size());
  const int mtry = params.mtry > 0 ? params.mtry : std::max(1, d / 3);
  ForestReg forest;
  forest.n_features = d;
  for (int t = 0; t < params.trees; ++t) {
    const std::uint64_t seed = detmath::mix_seed(params.seed, static_cast<std::uint64_t>(t));
    TreeBuilder builder(X, payload, mtry, params.min_leaf, params.max_depth, false,
                        detmath::mix_seed(seed, 1));
    forest.trees.push_back(builder.build(draw_samples(X.size(), params.bootstrap, seed)));
  }
  return forest;
}

ForestParams regression_defaults(int trees, std::uint64_t seed) {
  ForestParams p;
  p.trees = trees;
  p.min_leaf = 5;
  p.seed = seed;
  return p;
}

}  // namespace aed
