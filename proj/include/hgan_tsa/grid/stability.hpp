#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "hgan_tsa/core/error.hpp"

namespace hgan_tsa::grid {

/// Rotor-angle stability index
///   η = (360 - Δσ_max) / (360 + Δσ_max),
/// Δσ_max being the largest pairwise angle separation [deg] over all rows.
/// Result lies in (-1, 1].
inline double stability_index_from_spread(double max_separation_deg) {
  return (360.0 - max_separation_deg) / (360.0 + max_separation_deg);
}

/// `rotor_angles` is time x machines in degrees, restricted to the post-fault window.
inline double stability_index(const Eigen::MatrixXd& rotor_angles) {
  if (rotor_angles.cols() < 2) throw DataError("stability index undefined for fewer than two machines");
  if (rotor_angles.rows() == 0) throw DataError("stability index needs at least one post-fault row");
  double spread = 0.0;
  for (Eigen::Index r = 0; r < rotor_angles.rows(); ++r)
    spread = std::max(spread, rotor_angles.row(r).maxCoeff() - rotor_angles.row(r).minCoeff());
  return stability_index_from_spread(spread);
}

/// 1 = stable (η > 0), 0 = unstable (η ≤ 0).
inline int stability_label(double eta) { return eta > 0.0 ? 1 : 0; }

}  // namespace hgan_tsa::grid
