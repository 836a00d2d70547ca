#pragma once

#include "musicdemo/models/leadsheet_vae.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace musicdemo::models {

enum class InterpolationMode { slerp, lerp };

std::optional<InterpolationMode> interpolation_mode_from_string(std::string_view name);

inline constexpr int kMinInterpolationSteps = 2;
inline constexpr int kMaxInterpolationSteps = 17;

/// Point `k` of an `n`-point path from `a` (k = 0) to `b` (k = n - 1).
/// Endpoints are returned exactly; the weights are computed from the integer
/// grid so that the path from b to a is the same points in reverse order.
/// slerp falls back to lerp when a and b are (anti)colinear or zero.
music::LatentValues interpolate_latent(const music::LatentValues& a, const music::LatentValues& b, int k, int n,
                                       InterpolationMode mode);

/// alpha_k = k / (n - 1) for k = 0..n-1.
std::vector<double> interpolation_alphas(int n);

/// Decodes the n-point latent path between the posterior means of `a` and
/// `b`. Throws std::invalid_argument unless 2 <= n <= 17.
std::vector<LeadSheet> interpolate(const LeadSheetVae& model, const LeadSheet& a, const LeadSheet& b, int n,
                                   InterpolationMode mode = InterpolationMode::slerp);

struct PairedInterpolation {
  std::vector<double> alphas;
  std::vector<LeadSheet> first;
  std::vector<LeadSheet> second;
};

/// Both models' interpolations over the same alpha grid, for side-by-side
/// playback.
PairedInterpolation ab_interpolate(const LeadSheetVae& first, const LeadSheetVae& second, const LeadSheet& a,
                                   const LeadSheet& b, int n, InterpolationMode mode = InterpolationMode::slerp);

}  // namespace musicdemo::models
