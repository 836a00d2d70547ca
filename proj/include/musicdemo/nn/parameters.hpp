#pragma once

#include "musicdemo/nn/kernels.hpp"

#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>

namespace musicdemo::nn {

/// A trainable block viewed in place. `value` aliases storage owned by the
/// model; gradient and Adam moments live here.
template <typename Scalar>
struct Parameter {
  Parameter(std::string name_, Scalar* data, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name_)),
        value(data, rows, cols),
        grad(Matrix<Scalar>::Zero(rows, cols)),
        first_moment(Matrix<Scalar>::Zero(rows, cols)),
        second_moment(Matrix<Scalar>::Zero(rows, cols)) {}

  std::string name;
  Eigen::Map<Matrix<Scalar>> value;
  Matrix<Scalar> grad;
  Matrix<Scalar> first_moment;
  Matrix<Scalar> second_moment;
};

/// Named views onto a model's matrices. The model must outlive the set and
/// must not reallocate the viewed storage while the set exists.
template <typename Scalar>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  template <typename Derived>
  Parameter<Scalar>& add(std::string name, Eigen::PlainObjectBase<Derived>& storage) {
    if (by_name_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    auto& p = params_.emplace_back(name, storage.data(), storage.rows(), storage.cols());
    by_name_.emplace(std::move(name), &p);
    by_data_.emplace(storage.data(), &p);
    return p;
  }

  void add(const std::string& prefix, GruCell<Scalar>& cell) {
    cell.visit([&](const char* suffix, auto& m) { add(prefix + "." + suffix, m); });
  }

  void add(const std::string& prefix, DenseLayer<Scalar>& layer) {
    add(prefix + ".weight", layer.weight);
    add(prefix + ".bias", layer.bias);
  }

  Parameter<Scalar>& at(std::string_view name) {
    const auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
    return *it->second;
  }

  /// Looks a parameter up by the storage it views.
  Parameter<Scalar>& owning(const Scalar* data) {
    const auto it = by_data_.find(data);
    if (it == by_data_.end()) throw std::out_of_range("storage is not a registered parameter");
    return *it->second;
  }

  std::deque<Parameter<Scalar>>& all() { return params_; }
  const std::deque<Parameter<Scalar>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  Scalar grad_norm() const {
    Scalar sum = 0;
    for (const auto& p : params_) sum += p.grad.squaredNorm();
    return std::sqrt(sum);
  }

 private:
  std::deque<Parameter<Scalar>> params_;
  std::unordered_map<std::string, Parameter<Scalar>*> by_name_;
  std::unordered_map<const Scalar*, Parameter<Scalar>*> by_data_;
};

}  // namespace musicdemo::nn
