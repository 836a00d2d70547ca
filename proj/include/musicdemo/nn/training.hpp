#pragma once

#include "musicdemo/nn/tape.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace musicdemo::nn {

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string tensor, const std::string& message)
      : std::runtime_error(message), tensor_(std::move(tensor)) {}

  /// Loss term or parameter that went non-finite.
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 5.0;
};

/// Adaptive moment estimation with bias correction. Moments live on the
/// Parameter objects, so one optimizer drives one ParameterSet.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParameterSet<Scalar>& params, Scalar learning_rate) {
    ++steps_;
    Scalar clip = 1;
    if (config_.clip_norm > 0) {
      const Scalar norm = params.grad_norm();
      if (norm > config_.clip_norm) clip = static_cast<Scalar>(config_.clip_norm) / norm;
    }
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(steps_));
    const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(steps_));
    for (auto& p : params.all()) {
      const auto g = (p.grad * clip).eval();
      p.first_moment = b1 * p.first_moment + (Scalar(1) - b1) * g;
      p.second_moment = b2 * p.second_moment + (Scalar(1) - b2) * g.cwiseAbs2();
      if (learning_rate == Scalar(0)) continue;
      const auto m_hat = (p.first_moment.array() / correction1);
      const auto v_hat = (p.second_moment.array() / correction2);
      p.value.array() -= learning_rate * m_hat / (v_hat.sqrt() + static_cast<Scalar>(config_.epsilon));
    }
  }

  long steps() const { return steps_; }

 private:
  AdamConfig config_;
  long steps_ = 0;
};

template <typename Scalar>
struct LossGraph {
  typename BasicTape<Scalar>::Var total;
  std::vector<std::pair<std::string, typename BasicTape<Scalar>::Var>> terms;
};

struct LossBreakdown {
  double total = 0;
  std::vector<std::pair<std::string, double>> terms;

  double term(std::string_view name) const {
    for (const auto& [n, v] : terms) {
      if (n == name) return v;
    }
    throw std::out_of_range("no loss term " + std::string(name));
  }
};

/// One optimisation step: builds the loss on a fresh tape via
/// `build(tape) -> LossGraph`, back-propagates, and applies Adam.
/// Throws NonFiniteError naming the loss term or parameter at fault; the
/// weights are left untouched in that case.
template <typename Scalar, typename Build>
LossBreakdown train_step(ParameterSet<Scalar>& params, Adam<Scalar>& optimizer, Scalar learning_rate,
                         Build&& build) {
  BasicTape<Scalar> tape;
  const LossGraph<Scalar> graph = build(tape);

  LossBreakdown out;
  out.total = static_cast<double>(tape.scalar(graph.total));
  for (const auto& [name, var] : graph.terms) {
    const double v = static_cast<double>(tape.scalar(var));
    if (!std::isfinite(v)) throw NonFiniteError(name, "non-finite loss term '" + name + "'");
    out.terms.emplace_back(name, v);
  }
  if (!std::isfinite(out.total)) throw NonFiniteError("total", "non-finite total loss");

  params.zero_grad();
  tape.backward(graph.total);
  for (const auto& p : params.all()) {
    if (!p.grad.allFinite()) throw NonFiniteError(p.name, "non-finite gradient for '" + p.name + "'");
  }
  optimizer.step(params, learning_rate);
  return out;
}

/// KL weight at optimisation step `step` of `total`: linear ramp from 0 to
/// `beta` over the first `warmup_fraction` of training, then constant.
inline double kl_weight(double beta, long step, long total, double warmup_fraction = 0.2) {
  const double warmup = warmup_fraction * static_cast<double>(total);
  if (warmup <= 0) return beta;
  return beta * std::min(1.0, static_cast<double>(step) / warmup);
}

/// Shuffled minibatch index lists for one epoch.
inline std::vector<std::vector<int>> minibatches(int count, int batch_size, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < count; start += batch_size) {
    out.emplace_back(order.begin() + start, order.begin() + std::min(count, start + batch_size));
  }
  return out;
}

}  // namespace musicdemo::nn
