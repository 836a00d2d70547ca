#include "musicdemo/nn/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace musicdemo::nn {

namespace {

using Json = nlohmann::ordered_json;

static_assert(sizeof(double) == 8);

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

WeightsError parse_error(const std::string& what) { return {WeightsError::Kind::parse, "weight file: " + what}; }

}  // namespace

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void ModelWeights::add(std::string name, Tensor tensor) {
  if (find(name)) throw WeightsError(WeightsError::Kind::duplicate_tensor, "duplicate tensor '" + name + "'");
  if (tensor.shape.empty() || tensor.element_count() != tensor.data.size()) {
    throw WeightsError(WeightsError::Kind::invalid_tensor, "tensor '" + name + "' shape does not match data");
  }
  for (std::size_t d : tensor.shape) {
    if (d == 0) throw WeightsError(WeightsError::Kind::invalid_tensor, "tensor '" + name + "' has a zero dimension");
  }
  for (double v : tensor.data) {
    if (!std::isfinite(v)) throw WeightsError(WeightsError::Kind::invalid_tensor, "tensor '" + name + "' is not finite");
  }
  tensors.emplace_back(std::move(name), std::move(tensor));
}

const Tensor* ModelWeights::find(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string encode_weights(const ModelWeights& weights) {
  Json header;
  header["format_version"] = weights.format_version;
  header["metadata"] = weights.metadata;
  header["tensors"] = Json::array();
  for (const auto& [name, tensor] : weights.tensors) {
    header["tensors"].push_back(Json{{"name", name}, {"shape", tensor.shape}});
  }
  const std::string text = header.dump();

  std::string out;
  put_u64(out, text.size());
  out += text;
  for (const auto& [name, tensor] : weights.tensors) {
    for (double v : tensor.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

ModelWeights decode_weights(std::string_view bytes) {
  if (bytes.size() < 8) throw parse_error("truncated header length");
  const std::uint64_t header_length = get_u64(bytes, 0);
  if (header_length > bytes.size() - 8) throw parse_error("truncated header");

  Json header;
  try {
    header = Json::parse(bytes.substr(8, header_length));
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("malformed header: ") + e.what());
  }

  ModelWeights weights;
  try {
    weights.format_version = header.at("format_version").get<int>();
    if (weights.format_version != kWeightsFormatVersion) {
      throw WeightsError(WeightsError::Kind::version_mismatch,
                         "weight file version " + std::to_string(weights.format_version) + ", expected " +
                             std::to_string(kWeightsFormatVersion));
    }
    weights.metadata = header.at("metadata");
    std::size_t offset = 8 + header_length;
    for (const auto& entry : header.at("tensors")) {
      Tensor t;
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const std::size_t n = t.element_count();
      if (n > (bytes.size() - offset) / 8) throw parse_error("truncated payload");
      t.data.resize(n);
      for (std::size_t i = 0; i < n; ++i, offset += 8) t.data[i] = std::bit_cast<double>(get_u64(bytes, offset));
      weights.add(entry.at("name").get<std::string>(), std::move(t));
    }
    if (offset != bytes.size()) throw parse_error("trailing bytes after payload");
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("bad header field: ") + e.what());
  }
  return weights;
}

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WeightsError(WeightsError::Kind::io, "cannot write " + path.string());
  const std::string bytes = encode_weights(weights);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WeightsError(WeightsError::Kind::io, "write failed for " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsError(WeightsError::Kind::io, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_weights(buffer.str());
}

}  // namespace musicdemo::nn
