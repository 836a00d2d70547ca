#pragma once

// Reverse-mode differentiation over matrix-valued nodes. A tape is built
// fresh for every forward pass: each op appends a node holding its value and
// a closure that pushes the node's gradient to its inputs. Parameters enter
// as leaves whose gradients are added to Parameter::grad by backward().

#include "musicdemo/nn/kernels.hpp"
#include "musicdemo/nn/parameters.hpp"

#include <functional>
#include <unordered_map>

namespace musicdemo::nn {

template <typename Scalar>
class BasicTape {
 public:
  using MatrixT = Matrix<Scalar>;

  struct Var {
    std::size_t id = 0;
  };

  struct GruVars {
    Var W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h;
  };

  struct DenseVars {
    Var weight, bias;
  };

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const MatrixT& value(Var v) const { return nodes_[v.id].value; }
  Scalar scalar(Var v) const { return nodes_[v.id].value(0, 0); }

  /// Gradient accumulated at `v` by the last backward(); zero if none reached it.
  MatrixT grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return MatrixT::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var constant(MatrixT value) { return push(std::move(value), nullptr); }

  Var parameter(Parameter<Scalar>& p) {
    if (const auto it = bound_.find(&p); it != bound_.end()) return it->second;
    const Var v = push(MatrixT(p.value), nullptr);
    nodes_[v.id].param = &p;
    bound_.emplace(&p, v);
    return v;
  }

  GruVars parameters(GruCell<Scalar>& cell, ParameterSet<Scalar>& set) {
    auto bind = [&](MatrixT& m) { return parameter(set.owning(m.data())); };
    auto bind_v = [&](Vector<Scalar>& v) { return parameter(set.owning(v.data())); };
    return {bind(cell.W_z),   bind(cell.W_r),   bind(cell.W_h),   bind(cell.U_z),  bind(cell.U_r),
            bind(cell.U_h),   bind_v(cell.b_z), bind_v(cell.b_r), bind_v(cell.b_h)};
  }

  DenseVars parameters(DenseLayer<Scalar>& layer, ParameterSet<Scalar>& set) {
    return {parameter(set.owning(layer.weight.data())), parameter(set.owning(layer.bias.data()))};
  }

  /// W x + b, bias broadcast over columns.
  Var affine(Var w, Var x, Var b) {
    const MatrixT& W = value(w);
    const MatrixT& X = value(x);
    if (W.cols() != X.rows() || value(b).rows() != W.rows()) throw DimensionError("affine: shape mismatch");
    MatrixT out = W * X;
    out.colwise() += value(b).col(0);
    const Var y = push(std::move(out));
    nodes_[y.id].backward = [this, w, x, b, y] {
      const MatrixT& g = nodes_[y.id].grad;
      accumulate(w, g * value(x).transpose());
      accumulate(x, value(w).transpose() * g);
      accumulate(b, g.rowwise().sum());
    };
    return y;
  }

  Var affine(const DenseVars& layer, Var x) { return affine(layer.weight, x, layer.bias); }

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    const Var y = push(value(a) + value(b));
    nodes_[y.id].backward = [this, a, b, y] {
      accumulate(a, nodes_[y.id].grad);
      accumulate(b, nodes_[y.id].grad);
    };
    return y;
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    const Var y = push(value(a).cwiseProduct(value(b)));
    nodes_[y.id].backward = [this, a, b, y] {
      const MatrixT& g = nodes_[y.id].grad;
      accumulate(a, g.cwiseProduct(value(b)));
      accumulate(b, g.cwiseProduct(value(a)));
    };
    return y;
  }

  Var scale(Var a, Scalar factor) {
    const Var y = push(value(a) * factor);
    nodes_[y.id].backward = [this, a, y, factor] { accumulate(a, nodes_[y.id].grad * factor); };
    return y;
  }

  Var sigmoid(Var a) {
    const Var y = push(nn::sigmoid(value(a)));
    nodes_[y.id].backward = [this, a, y] {
      const auto& s = value(y).array();
      accumulate(a, (nodes_[y.id].grad.array() * s * (Scalar(1) - s)).matrix());
    };
    return y;
  }

  Var tanh(Var a) {
    const Var y = push(value(a).array().tanh().matrix());
    nodes_[y.id].backward = [this, a, y] {
      const auto& t = value(y).array();
      accumulate(a, (nodes_[y.id].grad.array() * (Scalar(1) - t.square())).matrix());
    };
    return y;
  }

  Var activate(Var a, Activation activation) {
    switch (activation) {
      case Activation::identity: return a;
      case Activation::sigmoid: return sigmoid(a);
      case Activation::tanh: return tanh(a);
      case Activation::softmax: break;
    }
    throw std::invalid_argument("softmax is only available fused into softmax_cross_entropy");
  }

  Var concat_rows(std::span<const Var> parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(parts.front()).cols();
    for (Var p : parts) {
      if (value(p).cols() != cols) throw DimensionError("concat_rows: column counts differ");
      rows += value(p).rows();
    }
    MatrixT out(rows, cols);
    Eigen::Index offset = 0;
    for (Var p : parts) {
      out.middleRows(offset, value(p).rows()) = value(p);
      offset += value(p).rows();
    }
    const Var y = push(std::move(out));
    nodes_[y.id].backward = [this, y, inputs = std::vector<Var>(parts.begin(), parts.end())] {
      Eigen::Index at = 0;
      for (Var p : inputs) {
        const Eigen::Index r = value(p).rows();
        accumulate(p, nodes_[y.id].grad.middleRows(at, r));
        at += r;
      }
    };
    return y;
  }

  Var concat_rows(std::initializer_list<Var> parts) {
    return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
  }

  Var mean(std::span<const Var> parts) {
    MatrixT out = value(parts.front());
    for (std::size_t i = 1; i < parts.size(); ++i) {
      check_same(parts.front(), parts[i], "mean");
      out += value(parts[i]);
    }
    const Scalar inv = Scalar(1) / static_cast<Scalar>(parts.size());
    const Var y = push(out * inv);
    nodes_[y.id].backward = [this, y, inv, inputs = std::vector<Var>(parts.begin(), parts.end())] {
      for (Var p : inputs) accumulate(p, nodes_[y.id].grad * inv);
    };
    return y;
  }

  /// Sum of scalars or same-shape nodes with fixed weights.
  Var weighted_sum(std::span<const std::pair<Var, Scalar>> terms) {
    MatrixT out = MatrixT::Zero(value(terms.front().first).rows(), value(terms.front().first).cols());
    for (const auto& [v, w] : terms) {
      check_same(terms.front().first, v, "weighted_sum");
      out += w * value(v);
    }
    const Var y = push(std::move(out));
    nodes_[y.id].backward = [this, y, inputs = std::vector<std::pair<Var, Scalar>>(terms.begin(), terms.end())] {
      for (const auto& [v, w] : inputs) accumulate(v, nodes_[y.id].grad * w);
    };
    return y;
  }

  Var sum(std::span<const Var> parts) {
    std::vector<std::pair<Var, Scalar>> terms;
    terms.reserve(parts.size());
    for (Var p : parts) terms.emplace_back(p, Scalar(1));
    return weighted_sum(terms);
  }

  /// Fused GRU update with the same convention as nn::gru_step.
  Var gru_step(const GruVars& cell, Var x, Var h) {
    const MatrixT& X = value(x);
    const MatrixT& H = value(h);
    if (X.rows() != value(cell.W_z).cols() || H.rows() != value(cell.U_z).rows() || X.cols() != H.cols()) {
      throw DimensionError("gru_step: shape mismatch");
    }
    MatrixT a_z = value(cell.W_z) * X + value(cell.U_z) * H;
    a_z.colwise() += value(cell.b_z).col(0);
    MatrixT a_r = value(cell.W_r) * X + value(cell.U_r) * H;
    a_r.colwise() += value(cell.b_r).col(0);
    MatrixT z = nn::sigmoid(a_z);
    MatrixT r = nn::sigmoid(a_r);
    MatrixT rh = r.cwiseProduct(H);
    MatrixT a_h = value(cell.W_h) * X + value(cell.U_h) * rh;
    a_h.colwise() += value(cell.b_h).col(0);
    MatrixT c = a_h.array().tanh().matrix();
    MatrixT out = ((Scalar(1) - z.array()) * H.array() + z.array() * c.array()).matrix();

    const Var y = push(std::move(out));
    nodes_[y.id].backward = [this, cell, x, h, y, z = std::move(z), r = std::move(r), rh = std::move(rh),
                             c = std::move(c)] {
      const MatrixT& g = nodes_[y.id].grad;
      const MatrixT& X = value(x);
      const MatrixT& H = value(h);
      const auto ga = g.array();
      const MatrixT d_ah = (ga * z.array() * (Scalar(1) - c.array().square())).matrix();
      const MatrixT d_az = (ga * (c.array() - H.array()) * z.array() * (Scalar(1) - z.array())).matrix();
      const MatrixT d_rh = value(cell.U_h).transpose() * d_ah;
      const MatrixT d_ar = (d_rh.array() * H.array() * r.array() * (Scalar(1) - r.array())).matrix();

      accumulate(cell.W_h, d_ah * X.transpose());
      accumulate(cell.U_h, d_ah * rh.transpose());
      accumulate(cell.b_h, d_ah.rowwise().sum());
      accumulate(cell.W_z, d_az * X.transpose());
      accumulate(cell.U_z, d_az * H.transpose());
      accumulate(cell.b_z, d_az.rowwise().sum());
      accumulate(cell.W_r, d_ar * X.transpose());
      accumulate(cell.U_r, d_ar * H.transpose());
      accumulate(cell.b_r, d_ar.rowwise().sum());

      accumulate(x, value(cell.W_z).transpose() * d_az + value(cell.W_r).transpose() * d_ar +
                        value(cell.W_h).transpose() * d_ah);
      accumulate(h, (ga * (Scalar(1) - z.array()) + d_rh.array() * r.array()).matrix() +
                        value(cell.U_z).transpose() * d_az + value(cell.U_r).transpose() * d_ar);
    };
    return y;
  }

  /// Sum over columns of -log softmax(logits)[target], divided by `divisor`.
  /// Columns whose target is negative are ignored.
  Var softmax_cross_entropy(Var logits, std::span<const int> targets, Scalar divisor) {
    const MatrixT& L = value(logits);
    if (static_cast<Eigen::Index>(targets.size()) != L.cols()) {
      throw DimensionError("softmax_cross_entropy: one target per column required");
    }
    MatrixT probs = nn::softmax(L);
    Scalar loss = 0;
    for (Eigen::Index c = 0; c < L.cols(); ++c) {
      const int t = targets[static_cast<std::size_t>(c)];
      if (t < 0) continue;
      if (t >= L.rows()) throw DimensionError("softmax_cross_entropy: target out of range");
      const Scalar shift = L.col(c).maxCoeff();
      const Scalar log_z = shift + std::log((L.col(c).array() - shift).exp().sum());
      loss += log_z - L(t, c);
    }
    const Var y = push(MatrixT::Constant(1, 1, loss / divisor));
    nodes_[y.id].backward = [this, logits, y, divisor, probs = std::move(probs),
                             targets = std::vector<int>(targets.begin(), targets.end())] {
      const Scalar g = nodes_[y.id].grad(0, 0) / divisor;
      MatrixT d = probs;
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        const int t = targets[static_cast<std::size_t>(c)];
        if (t < 0) {
          d.col(c).setZero();
        } else {
          d(t, c) -= Scalar(1);
        }
      }
      accumulate(logits, d * g);
    };
    return y;
  }

  /// Binary cross-entropy of sigmoid(logits) against 0/1 targets, summed and
  /// divided by `divisor`.
  Var sigmoid_cross_entropy(Var logits, const MatrixT& targets, Scalar divisor) {
    const MatrixT& L = value(logits);
    if (L.rows() != targets.rows() || L.cols() != targets.cols()) {
      throw DimensionError("sigmoid_cross_entropy: shape mismatch");
    }
    const auto l = L.array();
    const Scalar loss =
        (l.max(Scalar(0)) - l * targets.array() + (Scalar(1) + (-l.abs()).exp()).log()).sum();
    const Var y = push(MatrixT::Constant(1, 1, loss / divisor));
    nodes_[y.id].backward = [this, logits, y, divisor, targets] {
      const Scalar g = nodes_[y.id].grad(0, 0) / divisor;
      accumulate(logits, (nn::sigmoid(value(logits)) - targets) * g);
    };
    return y;
  }

  /// KL to N(0, I), summed over entries and divided by `divisor`.
  Var kl_standard_normal(Var mean, Var logvar, Scalar divisor) {
    check_same(mean, logvar, "kl_standard_normal");
    const Var y = push(MatrixT::Constant(1, 1, kl_divergence(value(mean), value(logvar)) / divisor));
    nodes_[y.id].backward = [this, mean, logvar, y, divisor] {
      const Scalar g = nodes_[y.id].grad(0, 0) / divisor;
      accumulate(mean, value(mean) * g);
      accumulate(logvar, ((value(logvar).array().exp() - Scalar(1)) * (Scalar(0.5) * g)).matrix());
    };
    return y;
  }

  /// mean + exp(logvar / 2) * eps for a fixed noise draw.
  Var reparameterize(Var mean, Var logvar, MatrixT eps) {
    check_same(mean, logvar, "reparameterize");
    MatrixT sigma = (value(logvar).array() * Scalar(0.5)).exp().matrix();
    const Var y = push(value(mean) + sigma.cwiseProduct(eps));
    nodes_[y.id].backward = [this, mean, logvar, y, sigma = std::move(sigma), eps = std::move(eps)] {
      const MatrixT& g = nodes_[y.id].grad;
      accumulate(mean, g);
      accumulate(logvar, (g.array() * sigma.array() * eps.array() * Scalar(0.5)).matrix());
    };
    return y;
  }

  /// Propagates d(root)/d(node) to every node and adds parameter gradients to
  /// their Parameter::grad. `root` must be 1 x 1.
  void backward(Var root) {
    if (value(root).size() != 1) throw DimensionError("backward: root must be a scalar");
    nodes_[root.id].grad = MatrixT::Ones(1, 1);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward();
      if (n.param) n.param->grad += n.grad;
    }
  }

 private:
  struct Node {
    MatrixT value;
    MatrixT grad;
    std::function<void()> backward;
    Parameter<Scalar>* param = nullptr;
  };

  Var push(MatrixT value, Parameter<Scalar>* param = nullptr) {
    nodes_.push_back(Node{std::move(value), MatrixT(), {}, param});
    return Var{nodes_.size() - 1};
  }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    MatrixT& grad = nodes_[v.id].grad;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }

  void check_same(Var a, Var b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
      throw DimensionError(std::string(op) + ": shape mismatch");
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, Var> bound_;
};

using Tape = BasicTape<double>;

}  // namespace musicdemo::nn
