#pragma once

#include "musicdemo/models/common.hpp"

#include <array>
#include <optional>
#include <vector>

namespace musicdemo::models {

using music::ChordSequence;
using music::HarmonicFunction;
using music::LeadSheet;
using music::MelodyLine;

struct HarmonizerShape {
  int melody_hidden = 64;
  int slot_hidden = 64;
};

struct Harmonization {
  ChordSequence chords;
  /// Empty only for the all-REST melody.
  std::array<std::optional<HarmonicFunction>, music::kHalfBars> functions;
  /// Per half-bar softmax over the 25 chord labels and the 3 functions.
  std::array<VectorXd, music::kHalfBars> chord_probabilities;
  std::array<VectorXd, music::kHalfBars> function_probabilities;
};

/// Multi-task melody harmonizer. A bidirectional GRU reads the one-hot
/// melody; its per-step states are averaged over each half-bar, a GRU runs
/// over the eight pooled states, and two heads predict the chord label and
/// its harmonic function for every half-bar.
class Harmonizer {
 public:
  static constexpr const char* kKind = "harmonizer";

  static Harmonizer initialize(std::uint64_t seed, HarmonizerShape shape = {});
  static Harmonizer from_weights(const nn::ModelWeights& weights);
  nn::ModelWeights to_weights() const;

  /// Argmax over both heads. An all-REST melody yields eight N.C. slots with
  /// no function.
  Harmonization harmonize(const MelodyLine& melody) const;

  void bind(nn::ParameterSet<double>& params);

  /// `chord_targets` / `function_targets` hold kHalfBars entries per example;
  /// negative function targets are ignored. Terms "chords" and "functions".
  nn::LossGraph<double> build_loss(nn::Tape& tape, nn::ParameterSet<double>& params,
                                   std::span<const MelodyLine> batch, std::span<const int> chord_targets,
                                   std::span<const int> function_targets, double function_weight);

 private:
  Harmonizer() = default;

  template <typename F>
  void visit(F&& f);

  HarmonizerShape shape_;
  nn::GruCell<double> melody_forward_;
  nn::GruCell<double> melody_backward_;
  nn::GruCell<double> slot_gru_;
  nn::DenseLayer<double> chord_head_;
  nn::DenseLayer<double> function_head_;
};

struct HarmonizerTargets {
  std::array<int, music::kHalfBars> chords{};
  std::array<int, music::kHalfBars> functions{};
};

/// Training targets for a sheet, or nullopt when a sounding half-bar carries
/// a chord outside the key. Half-bars that are all REST target N.C. with no
/// function.
std::optional<HarmonizerTargets> harmonizer_targets(const LeadSheet& sheet);

struct HarmonizerTraining {
  Harmonizer model;
  std::vector<EpochLog> log;
  int excluded = 0;  // sheets dropped for non-diatonic chords
};

/// Loss = chord CE + function_weight * function CE. Requires at least 32
/// usable sheets.
HarmonizerTraining train_harmonizer(std::span<const LeadSheet> corpus, const TrainConfig& config,
                                    HarmonizerShape shape = {});

struct HarmonizerMetrics {
  double chord_accuracy = 0;
  double function_accuracy = 0;  // over slots with a defined reference function
  double consistency = 0;        // predicted function == chord_function(predicted chord)
  double diatonic_fraction = 0;  // predicted chords diatonic in the sheet's key
};

HarmonizerMetrics evaluate_harmonizer(const Harmonizer& model, std::span<const LeadSheet> corpus);

}  // namespace musicdemo::models
