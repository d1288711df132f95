#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/io.hpp"
#include "hgan_tsa/grid/dataset.hpp"
#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::hgan {

using nn::Matrix;

/// Per-channel min-max scaling. A channel whose training range is empty
/// maps to 0.5 everywhere.
struct Normalization {
  std::vector<double> min;
  std::vector<double> max;
  std::size_t window = 1;  // rows from the measured sample used when fitting

  std::size_t channels() const { return min.size(); }
  bool constant(std::size_t c) const { return !(max[c] > min[c]); }

  std::vector<std::size_t> constant_channels() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < channels(); ++c)
      if (constant(c)) out.push_back(c);
    return out;
  }

  double normalize(double v, std::size_t c) const { return constant(c) ? 0.5 : (v - min[c]) / (max[c] - min[c]); }
  double denormalize(double v, std::size_t c) const { return constant(c) ? min[c] : min[c] + v * (max[c] - min[c]); }

  /// `m` is channels x anything.
  Matrix normalize(const Matrix& m) const {
    check(m);
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) out(r, c) = normalize(m(r, c), static_cast<std::size_t>(r));
    return out;
  }
  Matrix denormalize(const Matrix& m) const {
    check(m);
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) out(r, c) = denormalize(m(r, c), static_cast<std::size_t>(r));
    return out;
  }

 private:
  void check(const Matrix& m) const {
    if (static_cast<std::size_t>(m.rows()) != channels())
      throw ShapeError("normalization has " + std::to_string(channels()) + " channels, input has " +
                       std::to_string(m.rows()));
  }
};

inline Json to_json(const Normalization& n) { return Json{{"min", n.min}, {"max", n.max}, {"window", n.window}}; }

inline Normalization normalization_from_json(const Json& j) {
  require_known_keys(j, {"min", "max", "window"}, "normalization");
  Normalization n;
  n.min = json_get<std::vector<double>>(j, "min", "normalization");
  n.max = json_get<std::vector<double>>(j, "max", "normalization");
  n.window = json_get<std::size_t>(j, "window", "normalization");
  if (n.min.size() != n.max.size()) throw ConfigError("normalization: min/max length mismatch");
  return n;
}

/// Rows measured_index .. measured_index + depth of record `r`, or a DataError
/// when the record is too short.
inline void require_rows(const grid::TransientSample& r, std::size_t depth) {
  if (r.measured_index + depth >= static_cast<std::size_t>(r.voltages.rows()))
    throw DataError("record " + r.scenario_id + " has no " + std::to_string(depth) +
                    " samples after the measured sample (increase the horizon or reduce levels)");
}

/// Fits min/max on the training split over the rows the hierarchy consumes:
/// the measured sample and the following `depth` samples.
inline Normalization fit_normalization(const grid::Dataset& ds, std::size_t depth) {
  const auto train = ds.indices(grid::Split::kTrain);
  if (train.empty()) throw DataError("training split is empty");
  const auto channels = ds.channels();
  Normalization n;
  n.window = depth + 1;
  n.min.assign(channels, std::numeric_limits<double>::infinity());
  n.max.assign(channels, -std::numeric_limits<double>::infinity());
  for (auto i : train) {
    const auto& r = ds.records[i];
    require_rows(r, depth);
    for (std::size_t k = 0; k <= depth; ++k)
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = r.voltages(static_cast<Eigen::Index>(r.measured_index + k), static_cast<Eigen::Index>(c));
        n.min[c] = std::min(n.min[c], v);
        n.max[c] = std::max(n.max[c], v);
      }
  }
  return n;
}

/// Normalized sample sequences, one batch column per record:
/// steps[k] = x(t + k), k = 0..depth.
struct SequenceSet {
  std::vector<Matrix> steps;
  Matrix labels;  // 1 x count
  std::vector<std::size_t> records;

  std::size_t size() const { return records.size(); }
};

inline SequenceSet extract_sequences(const grid::Dataset& ds, std::span<const std::size_t> indices,
                                     const Normalization& norm, std::size_t depth) {
  if (norm.channels() != ds.channels())
    throw ShapeError("normalization has " + std::to_string(norm.channels()) + " channels, dataset has " +
                     std::to_string(ds.channels()));
  const auto count = static_cast<Eigen::Index>(indices.size());
  const auto channels = static_cast<Eigen::Index>(ds.channels());
  SequenceSet s;
  s.steps.assign(depth + 1, Matrix(channels, count));
  s.labels.resize(1, count);
  s.records.assign(indices.begin(), indices.end());
  for (Eigen::Index col = 0; col < count; ++col) {
    const auto& r = ds.records.at(indices[static_cast<std::size_t>(col)]);
    require_rows(r, depth);
    for (std::size_t k = 0; k <= depth; ++k) {
      const auto row = static_cast<Eigen::Index>(r.measured_index + k);
      for (Eigen::Index c = 0; c < channels; ++c)
        s.steps[k](c, col) = norm.normalize(r.voltages(row, c), static_cast<std::size_t>(c));
    }
    s.labels(0, col) = r.label;
  }
  return s;
}

/// The raw measured sample (first post-clearing row) of one record.
inline Eigen::VectorXd measured_sample(const grid::TransientSample& r) {
  return r.voltages.row(static_cast<Eigen::Index>(r.measured_index)).transpose();
}

}  // namespace hgan_tsa::hgan
