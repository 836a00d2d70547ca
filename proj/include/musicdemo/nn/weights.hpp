#pragma once

// Weight file layout (all integers little-endian):
//   u64 header_length
//   header_length bytes of UTF-8 JSON:
//     {"format_version":1,"metadata":{...},"tensors":[{"name":..,"shape":[..]},..]}
//   float64 payload of every tensor, concatenated in header order, row-major.

#include "musicdemo/nn/kernels.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace musicdemo::nn {

inline constexpr int kWeightsFormatVersion = 1;

class WeightsError : public std::runtime_error {
 public:
  enum class Kind { io, parse, version_mismatch, missing_tensor, shape_mismatch, duplicate_tensor, invalid_tensor };

  WeightsError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;  // row-major

  std::size_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Row-major tensor of shape [rows, cols].
template <typename Derived>
Tensor to_tensor(const Eigen::MatrixBase<Derived>& m) {
  Tensor t;
  t.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<double>(m(i, j)));
  }
  return t;
}

struct ModelWeights {
  int format_version = kWeightsFormatVersion;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  /// Throws WeightsError(duplicate_tensor / invalid_tensor).
  void add(std::string name, Tensor tensor);
  const Tensor* find(std::string_view name) const;

  /// Copies tensor `name` into `out`; throws missing_tensor or shape_mismatch.
  template <typename Derived>
  void assign_to(std::string_view name, Eigen::PlainObjectBase<Derived>& out) const {
    const Tensor* t = find(name);
    if (!t) throw WeightsError(WeightsError::Kind::missing_tensor, "missing tensor '" + std::string(name) + "'");
    if (t->shape.size() != 2 || t->shape[0] != static_cast<std::size_t>(out.rows()) ||
        t->shape[1] != static_cast<std::size_t>(out.cols())) {
      throw WeightsError(WeightsError::Kind::shape_mismatch, "shape mismatch for tensor '" + std::string(name) + "'");
    }
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = t->data[k++];
    }
  }

  std::string kind() const { return metadata.value("kind", std::string()); }

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

std::string encode_weights(const ModelWeights& weights);
ModelWeights decode_weights(std::string_view bytes);

void save_weights(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace musicdemo::nn
