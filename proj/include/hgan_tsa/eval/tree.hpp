#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "hgan_tsa/core/error.hpp"

namespace hgan_tsa::eval {

// CART classifier for binary labels, used as the single-sample baseline.

struct TreeOptions {
  std::size_t max_depth = 10;
  std::size_t min_leaf = 1;
};

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;  // go left iff x[feature] <= threshold
  std::size_t left = 0;
  std::size_t right = 0;
  std::array<std::size_t, 2> counts{0, 0};  // unstable, stable
  int label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t features = 0;

  int predict(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != features)
      throw ShapeError("tree expects " + std::to_string(features) + " features, got " + std::to_string(x.size()));
    std::size_t i = 0;
    while (!nodes[i].leaf) i = x(static_cast<Eigen::Index>(nodes[i].feature)) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].label;
  }

  std::size_t depth() const { return depth_from(0); }

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes[i].leaf) return 0;
    return 1 + std::max(depth_from(nodes[i].left), depth_from(nodes[i].right));
  }
};

namespace detail {

inline double gini(std::size_t neg, std::size_t pos) {
  const double n = static_cast<double>(neg + pos);
  if (n == 0.0) return 0.0;
  const double p = static_cast<double>(pos) / n;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

// Ties resolve to the lowest feature index, then the lowest threshold.
inline Split best_split(const Eigen::MatrixXd& x, const std::vector<int>& y, const std::vector<std::size_t>& rows,
                        std::size_t min_leaf) {
  Split best;
  const std::size_t n = rows.size();
  std::size_t total_pos = 0;
  for (auto r : rows) total_pos += static_cast<std::size_t>(y[r]);
  std::vector<std::size_t> order(rows);
  for (std::size_t f = 0; f < static_cast<std::size_t>(x.cols()); ++f) {
    const auto col = static_cast<Eigen::Index>(f);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), col) < x(static_cast<Eigen::Index>(b), col);
    });
    std::size_t left_pos = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_pos += static_cast<std::size_t>(y[order[i]]);
      const double lo = x(static_cast<Eigen::Index>(order[i]), col);
      const double hi = x(static_cast<Eigen::Index>(order[i + 1]), col);
      if (!(lo < hi)) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double imp = (static_cast<double>(nl) * gini(nl - left_pos, left_pos) +
                          static_cast<double>(nr) * gini(nr - (total_pos - left_pos), total_pos - left_pos)) /
                         static_cast<double>(n);
      if (!best.found || imp < best.impurity) best = {true, f, lo + 0.5 * (hi - lo), imp};
    }
  }
  return best;
}

inline std::size_t grow(DecisionTree& t, const Eigen::MatrixXd& x, const std::vector<int>& y,
                        const std::vector<std::size_t>& rows, std::size_t depth, const TreeOptions& opt) {
  TreeNode node;
  for (auto r : rows) ++node.counts[static_cast<std::size_t>(y[r])];
  node.label = node.counts[1] > node.counts[0] ? 1 : 0;
  const std::size_t id = t.nodes.size();
  t.nodes.push_back(node);

  const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
  if (pure || depth >= opt.max_depth) return id;
  const auto split = best_split(x, y, rows, opt.min_leaf);
  if (!split.found || !(split.impurity < gini(node.counts[0], node.counts[1]))) return id;

  std::vector<std::size_t> left, right;
  for (auto r : rows)
    (x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(split.feature)) <= split.threshold ? left : right)
        .push_back(r);
  const auto l = grow(t, x, y, left, depth + 1, opt);
  const auto r = grow(t, x, y, right, depth + 1, opt);
  auto& n = t.nodes[id];
  n.leaf = false;
  n.feature = split.feature;
  n.threshold = split.threshold;
  n.left = l;
  n.right = r;
  return id;
}

}  // namespace detail

/// Greedy Gini-minimizing tree on `features` (samples x features) with
/// labels in {0, 1}. Leaf ties predict unstable.
inline DecisionTree train_tree(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                               const TreeOptions& opt = {}) {
  if (features.rows() == 0) throw DataError("cannot train a tree on an empty split");
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    throw ShapeError("tree features and labels disagree in length");
  for (int l : labels)
    if (l != 0 && l != 1) throw DataError("tree labels must be 0 or 1");
  if (opt.min_leaf == 0) throw ConfigError("min_leaf must be >= 1");
  DecisionTree t;
  t.features = static_cast<std::size_t>(features.cols());
  std::vector<std::size_t> rows(labels.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  detail::grow(t, features, labels, rows, 0, opt);
  return t;
}

inline double tree_accuracy(const DecisionTree& t, const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t ok = 0;
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    if (t.predict(features.row(i).transpose()) == labels[static_cast<std::size_t>(i)]) ++ok;
  return static_cast<double>(ok) / static_cast<double>(labels.size());
}

}  // namespace hgan_tsa::eval
