#pragma once

#include <cmath>

#include "hgan_tsa/nn/loss.hpp"
#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::gan {

using nn::Matrix;

/// −[ln d_real + ln(1 − d_fake)], logs clamped.
inline double discriminator_loss(double d_real, double d_fake) {
  return -(std::log(nn::clamp_probability(d_real)) + std::log(1.0 - nn::clamp_probability(d_fake)));
}

struct DiscriminatorLossBatch {
  double value = 0.0;
  Matrix grad_real;  // d value / d d_real, 1 x batch
  Matrix grad_fake;
};

/// Batch mean of the scalar discriminator loss.
inline DiscriminatorLossBatch discriminator_loss(const Matrix& d_real, const Matrix& d_fake) {
  nn::require_shape(d_fake, d_real.rows(), d_real.cols(), "discriminator_loss: d_fake");
  const double n = static_cast<double>(d_real.size());
  DiscriminatorLossBatch out{0.0, Matrix(d_real.rows(), d_real.cols()), Matrix(d_fake.rows(), d_fake.cols())};
  for (Eigen::Index i = 0; i < d_real.size(); ++i) {
    const double r = nn::clamp_probability(d_real(i));
    const double f = nn::clamp_probability(d_fake(i));
    out.value += discriminator_loss(d_real(i), d_fake(i));
    out.grad_real(i) = -1.0 / (r * n);
    out.grad_fake(i) = 1.0 / ((1.0 - f) * n);
  }
  out.value /= n;
  return out;
}

struct GeneratorLossBreakdown {
  double total = 0.0;
  double adversarial = 0.0;    // ln(1 − d_fake), or −ln d_fake when non-saturating
  double squared_error = 0.0;  // mean squared error of the predicted sample
  double cross_entropy = 0.0;  // binary cross-entropy of p_stable against the label
};

inline double adversarial_term(double d_fake, bool non_saturating) {
  const double q = nn::clamp_probability(d_fake);
  return non_saturating ? -std::log(q) : std::log(1.0 - q);
}

/// Single-sample generator objective: adversarial + mse + bce.
inline GeneratorLossBreakdown generator_loss(double d_fake, const Matrix& x_hat, const Matrix& x_true, double p_stable,
                                             double label, bool non_saturating = false) {
  GeneratorLossBreakdown b;
  b.adversarial = adversarial_term(d_fake, non_saturating);
  b.squared_error = nn::mse_loss(x_hat, x_true).value;
  b.cross_entropy = nn::bce_loss(p_stable, label).value;
  b.total = b.adversarial + b.squared_error + b.cross_entropy;
  return b;
}

struct GeneratorLossBatch {
  GeneratorLossBreakdown parts;  // batch means
  Matrix grad_d_fake;            // 1 x batch
  Matrix grad_x_hat;             // channels x batch
  Matrix grad_p_stable;          // 1 x batch
};

struct GeneratorLossTerms {
  bool adversarial = true;
  bool non_saturating = false;
};

/// Batch-mean generator objective with gradients w.r.t. each network output.
/// The squared error averages over every channel and batch entry, which
/// equals the mean of the per-sample values.
inline GeneratorLossBatch generator_loss(const Matrix& d_fake, const Matrix& x_hat, const Matrix& x_true,
                                         const Matrix& p_stable, const Matrix& labels,
                                         GeneratorLossTerms terms = {}) {
  const auto batch = x_hat.cols();
  nn::require_shape(d_fake, 1, batch, "generator_loss: d_fake");
  nn::require_shape(p_stable, 1, batch, "generator_loss: p_stable");
  GeneratorLossBatch out;
  out.grad_d_fake = Matrix::Zero(1, batch);
  const double n = static_cast<double>(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double q = nn::clamp_probability(d_fake(i));
    out.parts.adversarial += adversarial_term(d_fake(i), terms.non_saturating) / n;
    if (terms.adversarial) out.grad_d_fake(i) = (terms.non_saturating ? -1.0 / q : -1.0 / (1.0 - q)) / n;
  }
  if (!terms.adversarial) out.parts.adversarial = 0.0;
  auto mse = nn::mse_loss(x_hat, x_true);
  auto bce = nn::bce_loss(p_stable, labels);
  out.parts.squared_error = mse.value;
  out.parts.cross_entropy = bce.value;
  out.grad_x_hat = std::move(mse.gradient);
  out.grad_p_stable = std::move(bce.gradient);
  out.parts.total = out.parts.adversarial + out.parts.squared_error + out.parts.cross_entropy;
  return out;
}

}  // namespace hgan_tsa::gan
