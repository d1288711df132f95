#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::nn {

/// Gated recurrent unit weights. W_* map the input, U_* the previous hidden
/// state; every gate has its own bias.
///
///   r_t  = σ(W_r x_t + U_r h_{t-1} + b_r)
///   z_t  = σ(W_z x_t + U_z h_{t-1} + b_z)
///   h'_t = tanh(W_h x_t + r_t ⊙ (U_h h_{t-1}) + b_h)
///   h_t  = z_t ⊙ h_{t-1} + (1 - z_t) ⊙ h'_t
struct GruLayerParams {
  Matrix w_r, w_z, w_h;  // hidden x input
  Matrix u_r, u_z, u_h;  // hidden x hidden
  Matrix b_r, b_z, b_h;  // hidden x 1
  std::uint64_t revision = 0;  // bumped on every update; tapes record it

  Eigen::Index input_size() const { return w_r.cols(); }
  Eigen::Index hidden_size() const { return w_r.rows(); }

  static GruLayerParams zeros(Eigen::Index input, Eigen::Index hidden) {
    GruLayerParams p;
    p.w_r = p.w_z = p.w_h = Matrix::Zero(hidden, input);
    p.u_r = p.u_z = p.u_h = Matrix::Zero(hidden, hidden);
    p.b_r = p.b_z = p.b_h = Matrix::Zero(hidden, 1);
    return p;
  }

  static GruLayerParams glorot(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
    GruLayerParams p = zeros(input, hidden);
    p.w_r = glorot_uniform(hidden, input, rng);
    p.w_z = glorot_uniform(hidden, input, rng);
    p.w_h = glorot_uniform(hidden, input, rng);
    p.u_r = glorot_uniform(hidden, hidden, rng);
    p.u_z = glorot_uniform(hidden, hidden, rng);
    p.u_h = glorot_uniform(hidden, hidden, rng);
    return p;
  }

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  void validate() const {
    const auto h = hidden_size(), in = input_size();
    require_shape(w_z, h, in, "gru.w_z");
    require_shape(w_h, h, in, "gru.w_h");
    require_shape(u_r, h, h, "gru.u_r");
    require_shape(u_z, h, h, "gru.u_z");
    require_shape(u_h, h, h, "gru.u_h");
    require_shape(b_r, h, 1, "gru.b_r");
    require_shape(b_z, h, 1, "gru.b_z");
    require_shape(b_h, h, 1, "gru.b_h");
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    f("w_r", s.w_r);
    f("w_z", s.w_z);
    f("w_h", s.w_h);
    f("u_r", s.u_r);
    f("u_z", s.u_z);
    f("u_h", s.u_h);
    f("b_r", s.b_r);
    f("b_z", s.b_z);
    f("b_h", s.b_h);
  }
};

/// Forward activations kept for backpropagation through time.
struct GruTape {
  const GruLayerParams* params = nullptr;
  std::uint64_t revision = 0;
  std::vector<Matrix> x;   // T inputs
  std::vector<Matrix> h;   // T+1 states, h[0] = h0
  std::vector<Matrix> r, z, candidate, recurrent;  // recurrent = U_h h_{t-1}

  void clear() { *this = GruTape{}; }
  std::size_t steps() const { return x.size(); }
};

/// Runs the GRU over `xs` (each input x batch). Returns h_1..h_T.
inline std::vector<Matrix> gru_forward(const GruLayerParams& p, std::span<const Matrix> xs, const Matrix& h0,
                                       GruTape* tape = nullptr) {
  if (xs.empty()) throw ShapeError("gru_forward: empty input sequence");
  const auto batch = xs.front().cols();
  require_shape(h0, p.hidden_size(), batch, "gru_forward: h0");
  if (tape) {
    tape->clear();
    tape->params = &p;
    tape->revision = p.revision;
    tape->h.push_back(h0);
  }
  std::vector<Matrix> out;
  out.reserve(xs.size());
  Matrix h = h0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Matrix& x = xs[t];
    require_shape(x, p.input_size(), batch, "gru_forward: x[" + std::to_string(t) + "]");
    const Matrix r = sigmoid((p.w_r * x + p.u_r * h).colwise() + p.b_r.col(0));
    const Matrix z = sigmoid((p.w_z * x + p.u_z * h).colwise() + p.b_z.col(0));
    const Matrix uh = p.u_h * h;
    const Matrix c = tanh((p.w_h * x + r.cwiseProduct(uh)).colwise() + p.b_h.col(0));
    Matrix next = z.cwiseProduct(h) + (1.0 - z.array()).matrix().cwiseProduct(c);
    if (tape) {
      tape->x.push_back(x);
      tape->r.push_back(r);
      tape->z.push_back(z);
      tape->candidate.push_back(c);
      tape->recurrent.push_back(uh);
      tape->h.push_back(next);
    }
    h = std::move(next);
    out.push_back(h);
  }
  return out;
}

struct GruGradients {
  GruLayerParams params;        // same layout as the layer
  std::vector<Matrix> inputs;   // dL/dx_t
  Matrix h0;                    // dL/dh0
};

/// Backpropagation through time. `upstream[t]` is dL/dh_{t+1} coming from
/// outside the recurrence (zero matrices where a step is unused).
inline GruGradients gru_backward(const GruLayerParams& p, const GruTape& tape, std::span<const Matrix> upstream) {
  if (tape.params != &p || tape.revision != p.revision)
    throw StateError("gru_backward: tape mismatch (recorded against other or older parameters)");
  const auto steps = tape.steps();
  if (upstream.size() != steps)
    throw ShapeError("gru_backward: expected " + std::to_string(steps) + " upstream gradients, got " +
                     std::to_string(upstream.size()));
  const auto batch = tape.h.front().cols();

  GruGradients g;
  g.params = zeros_like(p);
  g.inputs.resize(steps);
  Matrix dh = Matrix::Zero(p.hidden_size(), batch);
  for (std::size_t s = steps; s-- > 0;) {
    require_shape(upstream[s], p.hidden_size(), batch, "gru_backward: upstream");
    dh += upstream[s];
    const Matrix& x = tape.x[s];
    const Matrix& h_prev = tape.h[s];
    const Matrix& r = tape.r[s];
    const Matrix& z = tape.z[s];
    const Matrix& c = tape.candidate[s];

    const Matrix dz = dh.cwiseProduct(h_prev - c);
    const Matrix dc = dh.cwiseProduct((1.0 - z.array()).matrix());
    const Matrix da_c = dc.cwiseProduct((1.0 - c.array().square()).matrix());
    const Matrix da_z = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
    const Matrix dr = da_c.cwiseProduct(tape.recurrent[s]);
    const Matrix da_r = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));
    const Matrix d_uh = da_c.cwiseProduct(r);

    g.params.w_r.noalias() += da_r * x.transpose();
    g.params.w_z.noalias() += da_z * x.transpose();
    g.params.w_h.noalias() += da_c * x.transpose();
    g.params.u_r.noalias() += da_r * h_prev.transpose();
    g.params.u_z.noalias() += da_z * h_prev.transpose();
    g.params.u_h.noalias() += d_uh * h_prev.transpose();
    g.params.b_r += da_r.rowwise().sum();
    g.params.b_z += da_z.rowwise().sum();
    g.params.b_h += da_c.rowwise().sum();

    g.inputs[s] = p.w_r.transpose() * da_r + p.w_z.transpose() * da_z + p.w_h.transpose() * da_c;
    dh = dh.cwiseProduct(z) + p.u_r.transpose() * da_r + p.u_z.transpose() * da_z + p.u_h.transpose() * d_uh;
  }
  g.h0 = std::move(dh);
  return g;
}

}  // namespace hgan_tsa::nn
