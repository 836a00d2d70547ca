#pragma once

// Forward kernels for the dense/GRU substrate. Every function works on
// column-batched matrices: one column per example. A plain vector is a batch
// of one.

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace musicdemo::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using Rng = std::mt19937_64;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Activation { identity, sigmoid, tanh, softmax };

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;    // out

  Eigen::Index input_size() const { return weight.cols(); }
  Eigen::Index output_size() const { return weight.rows(); }
};

template <typename Scalar>
struct GruCell {
  Matrix<Scalar> W_z, W_r, W_h;  // H x I
  Matrix<Scalar> U_z, U_r, U_h;  // H x H
  Vector<Scalar> b_z, b_r, b_h;  // H

  Eigen::Index input_size() const { return W_z.cols(); }
  Eigen::Index hidden_size() const { return W_z.rows(); }

  /// Calls f(suffix, matrix) for each of the nine parameter blocks.
  template <typename F>
  void visit(F&& f) {
    f("W_z", W_z), f("W_r", W_r), f("W_h", W_h);
    f("U_z", U_z), f("U_r", U_r), f("U_h", U_h);
    f("b_z", b_z), f("b_r", b_r), f("b_h", b_h);
  }
};

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
Matrix<Scalar> glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const Scalar limit = std::sqrt(Scalar(6) / static_cast<Scalar>(rows + cols));
  std::uniform_real_distribution<Scalar> dist(-limit, limit);
  Matrix<Scalar> m(rows, cols);
  // Fill row-major so the draw order matches the weight-file layout.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

template <typename Scalar>
DenseLayer<Scalar> make_dense(Eigen::Index in, Eigen::Index out, Rng& rng) {
  return {glorot_uniform<Scalar>(out, in, rng), Vector<Scalar>::Zero(out)};
}

template <typename Scalar>
GruCell<Scalar> make_gru_cell(Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  GruCell<Scalar> cell;
  cell.W_z = glorot_uniform<Scalar>(hidden, in, rng);
  cell.W_r = glorot_uniform<Scalar>(hidden, in, rng);
  cell.W_h = glorot_uniform<Scalar>(hidden, in, rng);
  cell.U_z = glorot_uniform<Scalar>(hidden, hidden, rng);
  cell.U_r = glorot_uniform<Scalar>(hidden, hidden, rng);
  cell.U_h = glorot_uniform<Scalar>(hidden, hidden, rng);
  cell.b_z = Vector<Scalar>::Zero(hidden);
  cell.b_r = Vector<Scalar>::Zero(hidden);
  cell.b_h = Vector<Scalar>::Zero(hidden);
  return cell;
}

template <typename Derived>
typename Derived::PlainObject sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

/// Column-wise softmax, shifted by the column max for stability.
template <typename Derived>
typename Derived::PlainObject softmax(const Eigen::MatrixBase<Derived>& logits) {
  typename Derived::PlainObject out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const auto shifted = (logits.col(c).array() - logits.col(c).maxCoeff()).exp().eval();
    out.col(c) = shifted / shifted.sum();
  }
  return out;
}

template <typename Derived>
typename Derived::PlainObject activate(const Eigen::MatrixBase<Derived>& x, Activation activation) {
  switch (activation) {
    case Activation::identity: return x;
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return x.array().tanh().matrix();
    case Activation::softmax: return softmax(x);
  }
  return x;
}

/// activation(W x + b), bias broadcast across the batch columns.
template <typename Scalar, typename DerivedW, typename DerivedB, typename DerivedX>
Matrix<Scalar> dense(const Eigen::MatrixBase<DerivedW>& weight, const Eigen::MatrixBase<DerivedB>& bias,
                     const Eigen::MatrixBase<DerivedX>& x, Activation activation) {
  if (weight.cols() != x.rows() || weight.rows() != bias.rows() || bias.cols() != 1) {
    throw DimensionError("dense: weight " + std::to_string(weight.rows()) + "x" +
                         std::to_string(weight.cols()) + " cannot take input of " + std::to_string(x.rows()));
  }
  Matrix<Scalar> pre = weight * x;
  pre.colwise() += bias.col(0);
  return activate(pre, activation);
}

template <typename Scalar, typename DerivedX>
Matrix<Scalar> dense(const DenseLayer<Scalar>& layer, const Eigen::MatrixBase<DerivedX>& x,
                     Activation activation) {
  return dense<Scalar>(layer.weight, layer.bias, x, activation);
}

/// One GRU update, h_t = (1 - z) * h_prev + z * tanh(W_h x + U_h (r * h_prev) + b_h).
template <typename Scalar, typename DerivedX, typename DerivedH>
Matrix<Scalar> gru_step(const GruCell<Scalar>& cell, const Eigen::MatrixBase<DerivedX>& x,
                        const Eigen::MatrixBase<DerivedH>& h_prev) {
  if (x.rows() != cell.input_size() || h_prev.rows() != cell.hidden_size() || x.cols() != h_prev.cols()) {
    throw DimensionError("gru_step: expected input " + std::to_string(cell.input_size()) + " and hidden " +
                         std::to_string(cell.hidden_size()) + ", got " + std::to_string(x.rows()) + " and " +
                         std::to_string(h_prev.rows()));
  }
  Matrix<Scalar> a_z = cell.W_z * x + cell.U_z * h_prev;
  a_z.colwise() += cell.b_z;
  Matrix<Scalar> a_r = cell.W_r * x + cell.U_r * h_prev;
  a_r.colwise() += cell.b_r;
  const Matrix<Scalar> z = sigmoid(a_z);
  const Matrix<Scalar> r = sigmoid(a_r);
  Matrix<Scalar> a_h = cell.W_h * x + cell.U_h * r.cwiseProduct(h_prev);
  a_h.colwise() += cell.b_h;
  const auto candidate = a_h.array().tanh();
  return ((Scalar(1) - z.array()) * h_prev.array() + z.array() * candidate).matrix();
}

/// All hidden states of a forward pass over `inputs` starting from h0.
template <typename Scalar>
std::vector<Matrix<Scalar>> gru_sequence(const GruCell<Scalar>& cell, std::span<const Matrix<Scalar>> inputs,
                                         const Matrix<Scalar>& h0, bool reverse = false) {
  std::vector<Matrix<Scalar>> states(inputs.size());
  Matrix<Scalar> h = h0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t t = reverse ? inputs.size() - 1 - k : k;
    h = gru_step(cell, inputs[t], h);
    states[t] = h;
  }
  return states;
}

/// Per-step forward and backward states of a bidirectional pass, each indexed
/// by time step. Both directions start from zero.
template <typename Scalar>
std::pair<std::vector<Matrix<Scalar>>, std::vector<Matrix<Scalar>>> bgru_states(
    const GruCell<Scalar>& forward, const GruCell<Scalar>& backward, std::span<const Matrix<Scalar>> inputs) {
  if (inputs.empty()) throw DimensionError("bgru: empty sequence");
  const Eigen::Index batch = inputs.front().cols();
  const Matrix<Scalar> h0_forward = Matrix<Scalar>::Zero(forward.hidden_size(), batch);
  const Matrix<Scalar> h0_backward = Matrix<Scalar>::Zero(backward.hidden_size(), batch);
  return {gru_sequence(forward, inputs, h0_forward), gru_sequence(backward, inputs, h0_backward, true)};
}

/// [h_fwd at T ; h_bwd at 1], shape 2H x batch.
template <typename Scalar>
Matrix<Scalar> bgru_encode(const GruCell<Scalar>& forward, const GruCell<Scalar>& backward,
                           std::span<const Matrix<Scalar>> inputs) {
  const auto [fwd, bwd] = bgru_states(forward, backward, inputs);
  Matrix<Scalar> out(forward.hidden_size() + backward.hidden_size(), inputs.front().cols());
  out << fwd.back(), bwd.front();
  return out;
}

/// KL(N(mean, exp(logvar)) || N(0, I)), summed over every entry.
template <typename DerivedM, typename DerivedL>
typename DerivedM::Scalar kl_divergence(const Eigen::MatrixBase<DerivedM>& mean,
                                        const Eigen::MatrixBase<DerivedL>& logvar) {
  using Scalar = typename DerivedM::Scalar;
  if (mean.rows() != logvar.rows() || mean.cols() != logvar.cols()) {
    throw DimensionError("kl_divergence: mean and logvar shapes differ");
  }
  return Scalar(0.5) *
         (logvar.array().exp() + mean.array().square() - Scalar(1) - logvar.array()).sum();
}

/// Draws eps ~ N(0, I) from `rng` in column-major order.
template <typename Scalar>
Matrix<Scalar> standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
  Matrix<Scalar> eps(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) eps(i, j) = dist(rng);
  }
  return eps;
}

/// mean + exp(logvar / 2) * eps with eps drawn from `rng`.
template <typename DerivedM, typename DerivedL>
typename DerivedM::PlainObject sample_gaussian(const Eigen::MatrixBase<DerivedM>& mean,
                                               const Eigen::MatrixBase<DerivedL>& logvar, Rng& rng) {
  using Scalar = typename DerivedM::Scalar;
  if (mean.rows() != logvar.rows() || mean.cols() != logvar.cols()) {
    throw DimensionError("sample_gaussian: mean and logvar shapes differ");
  }
  const Matrix<Scalar> eps = standard_normal<Scalar>(mean.rows(), mean.cols(), rng);
  return (mean.array() + (logvar.array() / Scalar(2)).exp() * eps.array()).matrix();
}

}  // namespace musicdemo::nn
