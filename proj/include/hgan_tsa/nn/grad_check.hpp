#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

/// |a − n| / max(|a|, |n|, floor). The floor keeps gradients that are zero
/// up to rounding from dominating the report.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `analytic` (same layout as `params`) against central differences
/// of `loss()` with step `epsilon`. `loss` must read the current contents of
/// `params`; each entry is restored after probing.
template <ParameterSet P, class LossFn>
GradCheckReport grad_check(P& params, const P& analytic, LossFn&& loss, double epsilon = 1e-5,
                           double tolerance = 1e-4, double floor = 1e-6) {
  std::vector<const Matrix*> grads;
  analytic.visit([&](std::string_view, const Matrix& m) { grads.push_back(&m); });
  GradCheckReport rep;
  std::size_t t = 0;
  params.visit([&](std::string_view name, Matrix& m) {
    const Matrix& g = *grads.at(t++);
    require_shape(g, m.rows(), m.cols(), "grad_check: analytic gradient");
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m(i);
      m(i) = saved + epsilon;
      const double up = loss();
      m(i) = saved - epsilon;
      const double down = loss();
      m(i) = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      double err = relative_error(g(i), numeric, floor);
      if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
      ++rep.checked;
      if (rep.worst_index < 0 || err > rep.max_relative_error) {
        rep.max_relative_error = err;
        rep.worst_tensor = std::string(name);
        rep.worst_index = i;
        rep.worst_analytic = g(i);
        rep.worst_numeric = numeric;
      }
    }
  });
  rep.passed = rep.max_relative_error <= tolerance;
  return rep;
}

namespace detail {
struct SingleTensor {
  Matrix* m;
  template <class F>
  void visit(F&& f) {
    f("tensor", *m);
  }
  template <class F>
  void visit(F&& f) const {
    f("tensor", static_cast<const Matrix&>(*m));
  }
};
}  // namespace detail

/// Single-tensor variant for input gradients.
template <class LossFn>
GradCheckReport grad_check_tensor(Matrix& x, const Matrix& analytic, LossFn&& loss, double epsilon = 1e-5,
                                  double tolerance = 1e-4, double floor = 1e-6) {
  Matrix copy = analytic;
  detail::SingleTensor w{&x}, g{&copy};
  return grad_check(w, g, loss, epsilon, tolerance, floor);
}

}  // namespace hgan_tsa::nn
