#pragma once

#include <cmath>
#include <string_view>
#include <vector>

#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::nn {

struct SgdResult {
  bool applied = false;
  bool clipped = false;
  double gradient_norm = 0.0;
};

/// Counts updates skipped because of non-finite gradients.
struct SgdStats {
  std::size_t skipped = 0;
};

namespace detail {
template <class P>
void bump_revisions(P& p) {
  if constexpr (requires { p.bump_revisions(); }) p.bump_revisions();
  else if constexpr (requires { p.revision; }) ++p.revision;
}
}  // namespace detail

/// θ ← θ − lr·g, after rescaling g to global norm `clip_norm` when it is
/// larger (clip_norm ≤ 0 disables clipping). A non-finite gradient leaves θ
/// untouched and is counted in `stats`.
template <ParameterSet P>
SgdResult sgd_step(P& params, const P& grads, double learning_rate, double clip_norm = 0.0,
                   SgdStats* stats = nullptr) {
  if (learning_rate < 0.0) throw ConfigError("learning rate must be >= 0");
  SgdResult res;
  if (!all_finite(grads)) {
    if (stats) ++stats->skipped;
    res.gradient_norm = std::nan("");
    return res;
  }
  res.gradient_norm = std::sqrt(squared_norm(grads));
  double scale = learning_rate;
  if (clip_norm > 0.0 && res.gradient_norm > clip_norm) {
    scale *= clip_norm / res.gradient_norm;
    res.clipped = true;
  }
  std::vector<const Matrix*> gs;
  grads.visit([&](std::string_view, const Matrix& m) { gs.push_back(&m); });
  std::size_t i = 0;
  params.visit([&](std::string_view name, Matrix& m) {
    const Matrix& g = *gs.at(i++);
    require_shape(g, m.rows(), m.cols(), std::string("sgd_step: ") + std::string(name));
    if (scale != 0.0) m.noalias() -= scale * g;
  });
  detail::bump_revisions(params);
  res.applied = true;
  return res;
}

}  // namespace hgan_tsa::nn
