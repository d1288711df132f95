#pragma once

#include <span>
#include <string>
#include <vector>

#include "hgan_tsa/nn/dense.hpp"
#include "hgan_tsa/nn/gru.hpp"
#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::gan {

using nn::Matrix;

namespace detail {

template <class F>
void visit_prefixed(const std::string& prefix, auto& params, F& f) {
  params.visit([&](std::string_view name, auto& m) { f(prefix + std::string(name), m); });
}

struct StackCache {
  std::vector<nn::GruTape> tapes;
};

/// Stacked GRU from zero initial state; returns the last layer's final hidden state.
inline Matrix gru_stack_forward(const std::vector<nn::GruLayerParams>& stack, std::span<const Matrix> xs,
                                StackCache* cache) {
  if (cache) cache->tapes.assign(stack.size(), {});
  std::vector<Matrix> seq(xs.begin(), xs.end());
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const Matrix h0 = Matrix::Zero(stack[l].hidden_size(), seq.front().cols());
    seq = nn::gru_forward(stack[l], seq, h0, cache ? &cache->tapes[l] : nullptr);
  }
  return seq.back();
}

/// Backprop of gru_stack_forward. Accumulates into `grads` and returns dL/dx_t.
inline std::vector<Matrix> gru_stack_backward(const std::vector<nn::GruLayerParams>& stack, const StackCache& cache,
                                              const Matrix& d_final, std::vector<nn::GruLayerParams>& grads) {
  const auto steps = cache.tapes.front().steps();
  std::vector<Matrix> upstream(steps, Matrix::Zero(d_final.rows(), d_final.cols()));
  upstream.back() = d_final;
  for (std::size_t l = stack.size(); l-- > 0;) {
    auto g = nn::gru_backward(stack[l], cache.tapes[l], upstream);
    nn::accumulate(grads[l], g.params);
    upstream = std::move(g.inputs);
  }
  return upstream;
}

}  // namespace detail

/// Generator of one level: GRU stack over the condition sequence, a shared
/// tanh trunk on the final hidden state, then two parallel heads: a 2-way
/// softmax stability classifier and a sigmoid next-sample predictor.
struct GeneratorNet {
  std::vector<nn::GruLayerParams> gru_stack;
  nn::DenseParams trunk;
  nn::DenseParams head_label;
  nn::DenseParams head_pred;

  Eigen::Index channels() const { return head_pred.output_size(); }
  Eigen::Index hidden() const { return trunk.output_size(); }

  static GeneratorNet create(Eigen::Index channels, Eigen::Index hidden, std::size_t layers, Rng& rng) {
    GeneratorNet g;
    for (std::size_t l = 0; l < layers; ++l)
      g.gru_stack.push_back(nn::GruLayerParams::glorot(l == 0 ? channels : hidden, hidden, rng));
    g.trunk = nn::DenseParams::glorot(hidden, hidden, nn::Activation::kTanh, rng);
    g.head_label = nn::DenseParams::glorot(hidden, 2, nn::Activation::kSoftmax, rng);
    g.head_pred = nn::DenseParams::glorot(hidden, channels, nn::Activation::kSigmoid, rng);
    return g;
  }

  static GeneratorNet zeros(Eigen::Index channels, Eigen::Index hidden, std::size_t layers) {
    GeneratorNet g;
    for (std::size_t l = 0; l < layers; ++l)
      g.gru_stack.push_back(nn::GruLayerParams::zeros(l == 0 ? channels : hidden, hidden));
    g.trunk = nn::DenseParams::zeros(hidden, hidden, nn::Activation::kTanh);
    g.head_label = nn::DenseParams::zeros(hidden, 2, nn::Activation::kSoftmax);
    g.head_pred = nn::DenseParams::zeros(hidden, channels, nn::Activation::kSigmoid);
    return g;
  }

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  void bump_revisions() {
    for (auto& l : gru_stack) ++l.revision;
    ++trunk.revision;
    ++head_label.revision;
    ++head_pred.revision;
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    for (std::size_t l = 0; l < s.gru_stack.size(); ++l)
      detail::visit_prefixed("gru" + std::to_string(l) + ".", s.gru_stack[l], f);
    detail::visit_prefixed("trunk.", s.trunk, f);
    detail::visit_prefixed("head_label.", s.head_label, f);
    detail::visit_prefixed("head_pred.", s.head_pred, f);
  }
};

/// Discriminator: GRU stack, then a linear score squashed by a sigmoid into P(real).
struct DiscriminatorNet {
  std::vector<nn::GruLayerParams> gru_stack;
  nn::DenseParams head;

  static DiscriminatorNet create(Eigen::Index channels, Eigen::Index hidden, std::size_t layers, Rng& rng) {
    DiscriminatorNet d;
    for (std::size_t l = 0; l < layers; ++l)
      d.gru_stack.push_back(nn::GruLayerParams::glorot(l == 0 ? channels : hidden, hidden, rng));
    d.head = nn::DenseParams::glorot(hidden, 1, nn::Activation::kSigmoid, rng);
    return d;
  }

  static DiscriminatorNet zeros(Eigen::Index channels, Eigen::Index hidden, std::size_t layers) {
    DiscriminatorNet d;
    for (std::size_t l = 0; l < layers; ++l)
      d.gru_stack.push_back(nn::GruLayerParams::zeros(l == 0 ? channels : hidden, hidden));
    d.head = nn::DenseParams::zeros(hidden, 1, nn::Activation::kSigmoid);
    return d;
  }

  template <class F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  void bump_revisions() {
    for (auto& l : gru_stack) ++l.revision;
    ++head.revision;
  }

 private:
  template <class Self, class F>
  static void visit_impl(Self& s, F& f) {
    for (std::size_t l = 0; l < s.gru_stack.size(); ++l)
      detail::visit_prefixed("gru" + std::to_string(l) + ".", s.gru_stack[l], f);
    detail::visit_prefixed("head.", s.head, f);
  }
};

struct GeneratorOutput {
  Matrix x_hat;        // channels x batch, in (0, 1)
  Matrix class_probs;  // 2 x batch, row 1 = stable
  Matrix p_stable;     // 1 x batch
};

struct GeneratorCache {
  detail::StackCache stack;
  nn::DenseTape trunk, label, pred;
};

inline void check_sequence(std::span<const Matrix> seq, Eigen::Index channels, const char* who) {
  if (seq.empty()) throw ShapeError(std::string(who) + ": empty input sequence");
  const auto batch = seq.front().cols();
  for (std::size_t t = 0; t < seq.size(); ++t)
    nn::require_shape(seq[t], channels, batch, std::string(who) + ": step " + std::to_string(t));
}

inline GeneratorOutput generator_forward(const GeneratorNet& g, std::span<const Matrix> condition,
                                         GeneratorCache* cache = nullptr) {
  check_sequence(condition, g.gru_stack.front().input_size(), "generator_forward");
  const Matrix h = detail::gru_stack_forward(g.gru_stack, condition, cache ? &cache->stack : nullptr);
  const Matrix trunk = nn::dense_forward(g.trunk, h, cache ? &cache->trunk : nullptr);
  GeneratorOutput out;
  out.class_probs = nn::dense_forward(g.head_label, trunk, cache ? &cache->label : nullptr);
  out.x_hat = nn::dense_forward(g.head_pred, trunk, cache ? &cache->pred : nullptr);
  out.p_stable = out.class_probs.row(1);
  return out;
}

struct GeneratorGradients {
  GeneratorNet params;
  std::vector<Matrix> condition;
};

inline GeneratorGradients generator_backward(const GeneratorNet& g, const GeneratorCache& cache, const Matrix& d_x_hat,
                                             const Matrix& d_p_stable) {
  GeneratorGradients out{nn::zeros_like(g), {}};
  Matrix d_probs = Matrix::Zero(2, d_p_stable.cols());
  d_probs.row(1) = d_p_stable;
  auto gl = nn::dense_backward(g.head_label, cache.label, d_probs);
  auto gp = nn::dense_backward(g.head_pred, cache.pred, d_x_hat);
  nn::accumulate(out.params.head_label, gl.params);
  nn::accumulate(out.params.head_pred, gp.params);
  auto gt = nn::dense_backward(g.trunk, cache.trunk, gl.input + gp.input);
  nn::accumulate(out.params.trunk, gt.params);
  out.condition = detail::gru_stack_backward(g.gru_stack, cache.stack, gt.input, out.params.gru_stack);
  return out;
}

struct DiscriminatorCache {
  detail::StackCache stack;
  nn::DenseTape head;
};

/// P(real) per batch column, 1 x batch.
inline Matrix discriminator_forward(const DiscriminatorNet& d, std::span<const Matrix> sequence,
                                    DiscriminatorCache* cache = nullptr) {
  check_sequence(sequence, d.gru_stack.front().input_size(), "discriminator_forward");
  const Matrix h = detail::gru_stack_forward(d.gru_stack, sequence, cache ? &cache->stack : nullptr);
  return nn::dense_forward(d.head, h, cache ? &cache->head : nullptr);
}

struct DiscriminatorGradients {
  DiscriminatorNet params;
  std::vector<Matrix> sequence;
};

inline DiscriminatorGradients discriminator_backward(const DiscriminatorNet& d, const DiscriminatorCache& cache,
                                                     const Matrix& d_prob) {
  DiscriminatorGradients out{nn::zeros_like(d), {}};
  auto gh = nn::dense_backward(d.head, cache.head, d_prob);
  nn::accumulate(out.params.head, gh.params);
  out.sequence = detail::gru_stack_backward(d.gru_stack, cache.stack, gh.input, out.params.gru_stack);
  return out;
}

}  // namespace hgan_tsa::gan
