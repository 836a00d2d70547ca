#pragma once

#include "musicdemo/models/common.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace musicdemo::models {

using music::DrumPattern;
using music::LatentVector;

struct DrumVaeShape {
  int encoder_hidden = 64;
  int decoder_hidden = 128;
};

using DrumProbabilities = Eigen::Matrix<double, music::kDrumInstruments, music::kDrumSteps, Eigen::RowMajor>;

struct DrumDecoding {
  DrumPattern pattern;
  DrumProbabilities probabilities;
};

/// One-bar drum VAE. The encoder is a bidirectional GRU over the 96 grid
/// columns feeding separate mean and log-variance heads. The decoder starts
/// from tanh(dense(z)) and runs a GRU whose per-step input is z plus a
/// position code (sixteenth index one-hot, on-grid flag); a dense sigmoid
/// head emits the nine instrument probabilities per step.
class DrumVae {
 public:
  static constexpr const char* kKind = "drum-vae";
  static constexpr int kPositionFeatures = 17;

  static DrumVae initialize(std::uint64_t seed, DrumVaeShape shape = {});
  static DrumVae from_weights(const nn::ModelWeights& weights);
  nn::ModelWeights to_weights() const;

  const DrumVaeShape& shape() const { return shape_; }

  /// Posterior mean (deterministic).
  LatentVector encode(const DrumPattern& pattern) const;
  /// Reparameterised draw from the posterior.
  LatentVector encode_sampled(const DrumPattern& pattern, Rng& rng) const;
  /// Mean and log-variance rows for each pattern, each 32 x batch.
  std::pair<MatrixXd, MatrixXd> posterior(std::span<const DrumPattern> patterns) const;

  /// Probabilities >= 0.5 become onsets.
  DrumDecoding decode(const LatentVector& z) const;
  /// Per-step probabilities for a batch of latent columns (9 x batch each).
  std::vector<MatrixXd> decode_probabilities(const MatrixXd& latents) const;

  /// Registers every trainable block under its weight-file name.
  void bind(nn::ParameterSet<double>& params);

  /// Batch ELBO terms: "reconstruction" (summed BCE per example) and "kl".
  nn::LossGraph<double> build_loss(nn::Tape& tape, nn::ParameterSet<double>& params,
                                   std::span<const DrumPattern> batch, const MatrixXd& noise, double kl_weight);

 private:
  DrumVae() = default;

  template <typename F>
  void visit(F&& f);

  DrumVaeShape shape_;
  nn::GruCell<double> encoder_forward_;
  nn::GruCell<double> encoder_backward_;
  nn::DenseLayer<double> mean_head_;
  nn::DenseLayer<double> logvar_head_;
  nn::DenseLayer<double> decoder_init_;
  nn::GruCell<double> decoder_;
  nn::DenseLayer<double> output_head_;
};

/// Copy of `z` with coordinate `index` set to clamp(value, -4, 4).
/// Throws std::out_of_range for an index outside [0, 31].
LatentVector set_latent_dim(const LatentVector& z, int index, double value);

struct PriorSample {
  LatentVector latent;
  DrumDecoding decoding;
};

/// z ~ N(0, I), decoded.
PriorSample sample_prior(const DrumVae& model, Rng& rng);

struct DrumTraining {
  DrumVae model;
  std::vector<EpochLog> log;
};

/// Trains from `config.seed`; requires at least 16 patterns.
DrumTraining train_drum_vae(std::span<const DrumPattern> corpus, const TrainConfig& config, DrumVaeShape shape = {});

struct DrumMetrics {
  double f1 = 0;                 // cellwise, over the whole corpus
  double kl_per_dim = 0;         // mean posterior KL / 32
  double reconstruction_bce = 0; // mean summed BCE per pattern at the posterior mean
};

DrumMetrics evaluate_drum_vae(const DrumVae& model, std::span<const DrumPattern> corpus);

/// Cellwise F1 of `predicted` onsets against `reference`.
double onset_f1(std::span<const DrumPattern> reference, std::span<const DrumPattern> predicted);

}  // namespace musicdemo::models
