#pragma once

#include <cstdint>
#include <string>

#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::nn {

enum class Activation { kIdentity, kSigmoid, kTanh, kSoftmax };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSoftmax:
      return "softmax";
  }
  return "?";
}

/// Fully connected layer y = act(W x + b).
struct DenseParams {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1
  Activation activation = Activation::kIdentity;
  std::uint64_t revision = 0;

  Eigen::Index input_size() const { return weight.cols(); }
  Eigen::Index output_size() const { return weight.rows(); }

  static DenseParams zeros(Eigen::Index in, Eigen::Index out, Activation act) {
    return {Matrix::Zero(out, in), Matrix::Zero(out, 1), act, 0};
  }
  static DenseParams glorot(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng) {
    return {glorot_uniform(out, in, rng), Matrix::Zero(out, 1), act, 0};
  }

  template <class F>
  void visit(F&& f) {
    f("weight", weight);
    f("bias", bias);
  }
  template <class F>
  void visit(F&& f) const {
    f("weight", weight);
    f("bias", bias);
  }
};

struct DenseTape {
  const DenseParams* params = nullptr;
  std::uint64_t revision = 0;
  Matrix input;
  Matrix output;
};

/// Column-wise softmax, shifted by the column max.
inline Matrix softmax(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const Eigen::ArrayXd e = (a.col(c).array() - a.col(c).maxCoeff()).exp();
    out.col(c) = (e / e.sum()).matrix();
  }
  return out;
}

inline Matrix dense_forward(const DenseParams& p, const Matrix& input, DenseTape* tape = nullptr) {
  if (input.rows() != p.input_size())
    throw ShapeError("dense_forward: input has " + std::to_string(input.rows()) + " rows, layer expects " +
                     std::to_string(p.input_size()));
  const Matrix pre = (p.weight * input).colwise() + p.bias.col(0);
  Matrix out;
  switch (p.activation) {
    case Activation::kIdentity:
      out = pre;
      break;
    case Activation::kSigmoid:
      out = sigmoid(pre);
      break;
    case Activation::kTanh:
      out = tanh(pre);
      break;
    case Activation::kSoftmax:
      out = softmax(pre);
      break;
  }
  if (tape) *tape = {&p, p.revision, input, out};
  return out;
}

struct DenseGradients {
  DenseParams params;
  Matrix input;
};

inline DenseGradients dense_backward(const DenseParams& p, const DenseTape& tape, const Matrix& upstream) {
  if (tape.params != &p || tape.revision != p.revision) throw StateError("dense_backward: tape mismatch");
  require_shape(upstream, p.output_size(), tape.output.cols(), "dense_backward: upstream");
  const Matrix& y = tape.output;
  Matrix d_pre;
  switch (p.activation) {
    case Activation::kIdentity:
      d_pre = upstream;
      break;
    case Activation::kSigmoid:
      d_pre = upstream.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
      break;
    case Activation::kTanh:
      d_pre = upstream.cwiseProduct((1.0 - y.array().square()).matrix());
      break;
    case Activation::kSoftmax: {
      // J^T g = y ⊙ (g - <g, y>) per column.
      const Eigen::RowVectorXd dot = upstream.cwiseProduct(y).colwise().sum();
      d_pre = y.cwiseProduct(upstream - Matrix::Ones(y.rows(), 1) * dot);
      break;
    }
  }
  DenseGradients g;
  g.params = DenseParams{d_pre * tape.input.transpose(), d_pre.rowwise().sum(), p.activation, 0};
  g.input = p.weight.transpose() * d_pre;
  return g;
}

}  // namespace hgan_tsa::nn
