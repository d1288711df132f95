#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>

#include "hgan_tsa/core/random.hpp"

namespace hgan_tsa::grid {

/// Sentinel SNR meaning "no noise".
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds zero-mean white Gaussian noise to every column of `signal` with
/// variance P / 10^(snr_db/10), P being the mean squared value of that column.
inline Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& signal, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0.0) return signal;
  Eigen::MatrixXd out = signal;
  const double ratio = std::pow(10.0, snr_db / 10.0);
  for (Eigen::Index c = 0; c < signal.cols(); ++c) {
    const double power = signal.col(c).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, signal.rows()));
    const double sigma = std::sqrt(power / ratio);
    for (Eigen::Index r = 0; r < signal.rows(); ++r) out(r, c) += sigma * standard_normal(rng);
  }
  return out;
}

inline Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& signal, double snr_db, std::uint64_t seed) {
  Rng rng(seed);
  return inject_noise(signal, snr_db, rng);
}

}  // namespace hgan_tsa::grid
