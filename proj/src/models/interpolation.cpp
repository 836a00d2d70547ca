#include "musicdemo/models/interpolation.hpp"

#include <cmath>
#include <stdexcept>

namespace musicdemo::models {

namespace {

void check_steps(int n) {
  if (n < kMinInterpolationSteps || n > kMaxInterpolationSteps) {
    throw std::invalid_argument("interpolation steps must be in [2, 17]");
  }
}

}  // namespace

std::optional<InterpolationMode> interpolation_mode_from_string(std::string_view name) {
  if (name == "slerp") return InterpolationMode::slerp;
  if (name == "lerp") return InterpolationMode::lerp;
  return std::nullopt;
}

music::LatentValues interpolate_latent(const music::LatentValues& a, const music::LatentValues& b, int k, int n,
                                       InterpolationMode mode) {
  check_steps(n);
  if (k < 0 || k >= n) throw std::out_of_range("interpolation index out of range");
  if (k == 0) return a;
  if (k == n - 1 || a == b) return b;
  const double t_a = static_cast<double>(n - 1 - k) / (n - 1);
  const double t_b = static_cast<double>(k) / (n - 1);

  if (mode == InterpolationMode::slerp) {
    const double norms = a.norm() * b.norm();
    if (norms > 0) {
      const double omega = std::acos(std::clamp(a.dot(b) / norms, -1.0, 1.0));
      const double sin_omega = std::sin(omega);
      if (sin_omega > 1e-8) {
        return (std::sin(t_a * omega) / sin_omega) * a + (std::sin(t_b * omega) / sin_omega) * b;
      }
    }
  }
  return t_a * a + t_b * b;
}

std::vector<double> interpolation_alphas(int n) {
  check_steps(n);
  std::vector<double> out;
  for (int k = 0; k < n; ++k) out.push_back(static_cast<double>(k) / (n - 1));
  return out;
}

std::vector<LeadSheet> interpolate(const LeadSheetVae& model, const LeadSheet& a, const LeadSheet& b, int n,
                                   InterpolationMode mode) {
  check_steps(n);
  const music::LatentValues z_a = model.encode(a).values();
  const music::LatentValues z_b = model.encode(b).values();
  // Decoded one point at a time: a batched product may round differently,
  // and endpoints must match decode(z_a) / decode(z_b) exactly.
  std::vector<LeadSheet> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(model.decode(LatentVector(interpolate_latent(z_a, z_b, k, n, mode))));
  return out;
}

PairedInterpolation ab_interpolate(const LeadSheetVae& first, const LeadSheetVae& second, const LeadSheet& a,
                                   const LeadSheet& b, int n, InterpolationMode mode) {
  PairedInterpolation out;
  out.alphas = interpolation_alphas(n);
  out.first = interpolate(first, a, b, n, mode);
  out.second = interpolate(second, a, b, n, mode);
  return out;
}

}  // namespace musicdemo::models
