#pragma once

#include "musicdemo/music/types.hpp"
#include "musicdemo/nn/training.hpp"
#include "musicdemo/nn/weights.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace musicdemo::models {

using nn::MatrixXd;
using nn::Rng;
using nn::VectorXd;

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 1e-3;
  /// KL weight after warm-up (VAEs only).
  double beta = 0.2;
  double warmup_fraction = 0.2;
  /// Function-head loss weight (harmonizer only).
  double function_weight = 0.5;
  std::uint64_t seed = 1;
  /// Receives one line per epoch when set.
  std::function<void(const std::string&)> progress;
};

/// Shipped configuration for "drum", "leadsheet" or "harmonizer".
/// Throws std::invalid_argument for any other name.
TrainConfig shipped_config(std::string_view model);

struct EpochLog {
  int epoch = 0;
  double total = 0;
  std::vector<std::pair<std::string, double>> terms;

  double term(std::string_view name) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `config.epochs` epochs of shuffled minibatch Adam steps over
/// `sample_count` samples. `build(tape, batch_indices, kl_weight, rng)`
/// returns the batch loss graph; epoch logs average its terms over batches.
std::vector<EpochLog> fit(nn::ParameterSet<double>& params, int sample_count, const TrainConfig& config,
                          const std::function<nn::LossGraph<double>(nn::Tape&, std::span<const int>, double, Rng&)>& build);

/// One-hot columns: out(ids[c], c) = 1.
MatrixXd one_hot(std::span<const int> ids, int classes);

/// Checks the metadata kind of a weight manifest; throws WeightsError(parse).
void require_kind(const nn::ModelWeights& weights, std::string_view kind);

/// Index of the largest entry of each column (first on ties).
std::vector<int> argmax_columns(const MatrixXd& m);

}  // namespace musicdemo::models
