#pragma once

#include "musicdemo/models/common.hpp"

#include <utility>
#include <vector>

namespace musicdemo::models {

using music::LatentVector;
using music::LeadSheet;

struct LeadSheetVaeShape {
  int encoder_hidden = 64;
  int fusion_hidden = 128;
  int melody_decoder_hidden = 128;
  int chord_decoder_hidden = 64;
};

/// Four-bar lead-sheet VAE. Two bidirectional GRUs read the one-hot melody
/// and the chord chroma (each half-bar chroma repeated over its 8 steps);
/// their final states are concatenated and passed through a tanh dense layer
/// into mean and log-variance heads. Two unidirectional GRU decoders, both
/// initialised from z and fed z plus a position code, emit a 51-way melody
/// softmax per step and a 25-way chord softmax per half-bar.
class LeadSheetVae {
 public:
  static constexpr const char* kKind = "leadsheet-vae";
  static constexpr int kMelodyPositionFeatures = music::kStepsPerBar + music::kBars;
  static constexpr int kChordPositionFeatures = music::kHalfBars;

  static LeadSheetVae initialize(std::uint64_t seed, LeadSheetVaeShape shape = {});
  static LeadSheetVae from_weights(const nn::ModelWeights& weights);
  nn::ModelWeights to_weights() const;

  const LeadSheetVaeShape& shape() const { return shape_; }

  LatentVector encode(const LeadSheet& sheet) const;
  LatentVector encode_sampled(const LeadSheet& sheet, Rng& rng) const;
  std::pair<MatrixXd, MatrixXd> posterior(std::span<const LeadSheet> sheets) const;

  /// Argmax decoding. Orphan HOLD tokens are rewritten as REST so the result
  /// is always a valid melody; chroma follows from the chord labels.
  LeadSheet decode(const LatentVector& z) const;
  std::vector<LeadSheet> decode_batch(const MatrixXd& latents) const;

  void bind(nn::ParameterSet<double>& params);

  /// Terms "melody", "chords" (summed cross-entropy per example) and "kl".
  nn::LossGraph<double> build_loss(nn::Tape& tape, nn::ParameterSet<double>& params,
                                   std::span<const LeadSheet> batch, const MatrixXd& noise, double kl_weight);

 private:
  LeadSheetVae() = default;

  template <typename F>
  void visit(F&& f);

  LeadSheetVaeShape shape_;
  nn::GruCell<double> melody_forward_;
  nn::GruCell<double> melody_backward_;
  nn::GruCell<double> chord_forward_;
  nn::GruCell<double> chord_backward_;
  nn::DenseLayer<double> fusion_;
  nn::DenseLayer<double> mean_head_;
  nn::DenseLayer<double> logvar_head_;
  nn::DenseLayer<double> melody_init_;
  nn::GruCell<double> melody_decoder_;
  nn::DenseLayer<double> melody_output_;
  nn::DenseLayer<double> chord_init_;
  nn::GruCell<double> chord_decoder_;
  nn::DenseLayer<double> chord_output_;
};

struct LeadSheetTraining {
  LeadSheetVae model;
  std::vector<EpochLog> log;
};

/// Requires at least 32 sheets.
LeadSheetTraining train_leadsheet_vae(std::span<const LeadSheet> corpus, const TrainConfig& config,
                                      LeadSheetVaeShape shape = {});

struct LeadSheetMetrics {
  double melody_accuracy = 0;  // token accuracy of decode(encode(x)) over all steps
  double chord_accuracy = 0;   // fraction of half-bar labels reproduced
  double kl_per_dim = 0;
};

LeadSheetMetrics evaluate_leadsheet_vae(const LeadSheetVae& model, std::span<const LeadSheet> corpus);

// Sequence encodings shared with the harmonizer.
std::vector<MatrixXd> melody_one_hot_steps(std::span<const music::MelodyLine* const> melodies);
std::vector<MatrixXd> chroma_steps(std::span<const music::ChordSequence* const> chords);

}  // namespace musicdemo::models
