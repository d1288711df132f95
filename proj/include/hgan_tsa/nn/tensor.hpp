#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hgan_tsa/core/error.hpp"
#include "hgan_tsa/core/random.hpp"

namespace hgan_tsa::nn {

/// Activations are stored feature-major: one column per batch element.
using Matrix = Eigen::MatrixXd;

/// A learnable weight set. `visit` presents every tensor under a stable,
/// unique name; gradient buffers are values of the same type.
template <class P>
concept ParameterSet = requires(P& p, const P& cp) {
  p.visit([](std::string_view, Matrix&) {});
  cp.visit([](std::string_view, const Matrix&) {});
};

template <ParameterSet P>
P zeros_like(const P& p) {
  P out = p;
  out.visit([](std::string_view, Matrix& m) { m.setZero(); });
  return out;
}

template <ParameterSet P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  p.visit([&](std::string_view, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

/// dst += src, tensor by tensor. Both must share a layout.
template <ParameterSet P>
void accumulate(P& dst, const P& src) {
  std::vector<const Matrix*> srcs;
  src.visit([&](std::string_view, const Matrix& m) { srcs.push_back(&m); });
  std::size_t i = 0;
  dst.visit([&](std::string_view name, Matrix& m) {
    const Matrix& s = *srcs.at(i++);
    if (s.rows() != m.rows() || s.cols() != m.cols())
      throw ShapeError("gradient layout mismatch at '" + std::string(name) + "'");
    m += s;
  });
}

template <ParameterSet P>
double squared_norm(const P& p) {
  double s = 0.0;
  p.visit([&](std::string_view, const Matrix& m) { s += m.squaredNorm(); });
  return s;
}

template <ParameterSet P>
bool all_finite(const P& p) {
  bool ok = true;
  p.visit([&](std::string_view, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = uniform(rng, -a, a);
  return m;
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline Matrix sigmoid(const Matrix& a) {
  return a.unaryExpr([](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

inline Matrix tanh(const Matrix& a) { return a.array().tanh().matrix(); }

}  // namespace hgan_tsa::nn
