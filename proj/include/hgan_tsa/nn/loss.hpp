#pragma once

#include <algorithm>
#include <cmath>

#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::nn {

/// Floor applied to every probability before a logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

inline double clamp_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

inline double safe_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

struct ScalarLoss {
  double value = 0.0;
  double gradient = 0.0;  // d value / d prediction
};

/// Binary cross-entropy −[y ln p + (1−y) ln(1−p)], with p clamped away from 0 and 1.
inline ScalarLoss bce_loss(double p, double y) {
  const double q = clamp_probability(p);
  return {-(y * std::log(q) + (1.0 - y) * std::log(1.0 - q)), (q - y) / (q * (1.0 - q))};
}

struct BatchLoss {
  double value = 0.0;
  Matrix gradient;  // same shape as the prediction
};

/// Mean binary cross-entropy over all entries of `p`.
inline BatchLoss bce_loss(const Matrix& p, const Matrix& y) {
  require_shape(y, p.rows(), p.cols(), "bce_loss: labels");
  const double n = static_cast<double>(p.size());
  BatchLoss out{0.0, Matrix(p.rows(), p.cols())};
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto l = bce_loss(p(i), y(i));
    out.value += l.value;
    out.gradient(i) = l.gradient / n;
  }
  out.value /= n;
  return out;
}

/// Mean of squared element differences; gradient 2(x̂ − x)/n.
inline BatchLoss mse_loss(const Matrix& prediction, const Matrix& target) {
  require_shape(target, prediction.rows(), prediction.cols(), "mse_loss: target");
  const double n = static_cast<double>(prediction.size());
  const Matrix diff = prediction - target;
  return {diff.squaredNorm() / n, diff * (2.0 / n)};
}

}  // namespace hgan_tsa::nn
