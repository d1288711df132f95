#pragma once

#include <vector>

#include "hgan_tsa/eval/metrics.hpp"
#include "hgan_tsa/eval/tree.hpp"

namespace hgan_tsa::eval {

/// Measured samples (rows) and labels of one split, in raw units.
struct FeatureTable {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};

inline FeatureTable measured_features(const grid::Dataset& ds, grid::Split split, const EvalOptions& opt = {}) {
  const auto idx = ds.indices(split);
  FeatureTable t;
  t.features.resize(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(ds.channels()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    t.features.row(static_cast<Eigen::Index>(i)) = observed_sample(ds, idx[i], opt).transpose();
    t.labels.push_back(ds.records[idx[i]].label);
  }
  return t;
}

/// Decision tree trained on the measured samples of the train split and
/// scored on the test split.
inline ConfusionMatrix tree_baseline(const grid::Dataset& ds, const TreeOptions& opt = {}) {
  const auto train = measured_features(ds, grid::Split::kTrain);
  const auto test = measured_features(ds, grid::Split::kTest);
  if (test.labels.empty()) throw DataError("the test split is empty");
  const auto tree = train_tree(train.features, train.labels, opt);
  ConfusionMatrix cm;
  for (Eigen::Index i = 0; i < test.features.rows(); ++i)
    cm.add(tree.predict(test.features.row(i).transpose()), test.labels[static_cast<std::size_t>(i)]);
  return cm;
}

}  // namespace hgan_tsa::eval
