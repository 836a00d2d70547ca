#include "musicdemo/models/harmonizer.hpp"

#include "musicdemo/models/leadsheet_vae.hpp"
#include "musicdemo/music/theory.hpp"

#include <iostream>

namespace musicdemo::models {

namespace {

using music::kChordVocab;
using music::kFunctionClasses;
using music::kHalfBars;
using music::kMelodySteps;
using music::kMelodyVocab;
using music::kStepsPerHalfBar;

std::vector<const MelodyLine*> pointers(std::span<const MelodyLine> melodies) {
  std::vector<const MelodyLine*> out;
  for (const auto& m : melodies) out.push_back(&m);
  return out;
}

}  // namespace

template <typename F>
void Harmonizer::visit(F&& f) {
  auto gru = [&](const std::string& prefix, nn::GruCell<double>& cell) {
    cell.visit([&](const char* suffix, auto& m) { f(prefix + "." + suffix, m); });
  };
  gru("melody.forward", melody_forward_);
  gru("melody.backward", melody_backward_);
  gru("slots.gru", slot_gru_);
  f("heads.chord.weight", chord_head_.weight);
  f("heads.chord.bias", chord_head_.bias);
  f("heads.function.weight", function_head_.weight);
  f("heads.function.bias", function_head_.bias);
}

Harmonizer Harmonizer::initialize(std::uint64_t seed, HarmonizerShape shape) {
  Rng rng(seed);
  Harmonizer m;
  m.shape_ = shape;
  m.melody_forward_ = nn::make_gru_cell<double>(kMelodyVocab, shape.melody_hidden, rng);
  m.melody_backward_ = nn::make_gru_cell<double>(kMelodyVocab, shape.melody_hidden, rng);
  m.slot_gru_ = nn::make_gru_cell<double>(2 * shape.melody_hidden, shape.slot_hidden, rng);
  m.chord_head_ = nn::make_dense<double>(shape.slot_hidden, kChordVocab, rng);
  m.function_head_ = nn::make_dense<double>(shape.slot_hidden, kFunctionClasses, rng);
  return m;
}

Harmonizer Harmonizer::from_weights(const nn::ModelWeights& weights) {
  require_kind(weights, kKind);
  HarmonizerShape shape;
  try {
    shape.melody_hidden = weights.metadata.at("melody_hidden").get<int>();
    shape.slot_hidden = weights.metadata.at("slot_hidden").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw nn::WeightsError(nn::WeightsError::Kind::parse, "harmonizer metadata lacks hidden sizes");
  }
  Harmonizer m = initialize(0, shape);
  m.visit([&](const std::string& name, auto& storage) { weights.assign_to(name, storage); });
  return m;
}

nn::ModelWeights Harmonizer::to_weights() const {
  nn::ModelWeights w;
  w.metadata = {{"kind", kKind},
                {"melody_vocab", kMelodyVocab},
                {"chord_vocab", kChordVocab},
                {"function_classes", kFunctionClasses},
                {"melody_hidden", shape_.melody_hidden},
                {"slot_hidden", shape_.slot_hidden}};
  const_cast<Harmonizer*>(this)->visit([&](const std::string& name, auto& m) { w.add(name, nn::to_tensor(m)); });
  return w;
}

void Harmonizer::bind(nn::ParameterSet<double>& params) {
  visit([&](const std::string& name, auto& m) { params.add(name, m); });
}

Harmonization Harmonizer::harmonize(const MelodyLine& melody) const {
  Harmonization out;
  if (melody.all_rest()) {
    for (int s = 0; s < kHalfBars; ++s) {
      out.chord_probabilities[s] = VectorXd::Unit(kChordVocab, music::kNoChordClass);
      out.function_probabilities[s] = VectorXd::Zero(kFunctionClasses);
    }
    return out;
  }
  const MelodyLine* ptr = &melody;
  const auto steps = melody_one_hot_steps(std::span(&ptr, 1));
  const auto [fwd, bwd] = nn::bgru_states<double>(melody_forward_, melody_backward_, steps);

  std::array<music::ChordSymbol, kHalfBars> chords;
  MatrixXd h = MatrixXd::Zero(shape_.slot_hidden, 1);
  for (int s = 0; s < kHalfBars; ++s) {
    MatrixXd pooled = MatrixXd::Zero(2 * shape_.melody_hidden, 1);
    for (int t = s * kStepsPerHalfBar; t < (s + 1) * kStepsPerHalfBar; ++t) {
      pooled.topRows(shape_.melody_hidden) += fwd[t];
      pooled.bottomRows(shape_.melody_hidden) += bwd[t];
    }
    pooled /= kStepsPerHalfBar;
    h = nn::gru_step(slot_gru_, pooled, h);
    out.chord_probabilities[s] = nn::dense(chord_head_, h, nn::Activation::softmax).col(0);
    out.function_probabilities[s] = nn::dense(function_head_, h, nn::Activation::softmax).col(0);
    Eigen::Index chord = 0;
    Eigen::Index function = 0;
    out.chord_probabilities[s].maxCoeff(&chord);
    out.function_probabilities[s].maxCoeff(&function);
    chords[s] = music::ChordSymbol::from_class_index(static_cast<int>(chord));
    out.functions[s] = static_cast<HarmonicFunction>(function);
  }
  out.chords = ChordSequence(chords);
  return out;
}

nn::LossGraph<double> Harmonizer::build_loss(nn::Tape& tape, nn::ParameterSet<double>& params,
                                             std::span<const MelodyLine> batch, std::span<const int> chord_targets,
                                             std::span<const int> function_targets, double function_weight) {
  using Var = nn::Tape::Var;
  const auto size = static_cast<Eigen::Index>(batch.size());
  const double divisor = static_cast<double>(size);
  const auto steps = melody_one_hot_steps(pointers(batch));

  const auto f = tape.parameters(melody_forward_, params);
  const auto b = tape.parameters(melody_backward_, params);
  const auto slot = tape.parameters(slot_gru_, params);
  const auto chord_head = tape.parameters(chord_head_, params);
  const auto function_head = tape.parameters(function_head_, params);

  std::vector<Var> inputs;
  for (const auto& s : steps) inputs.push_back(tape.constant(s));
  std::vector<Var> forward_states(kMelodySteps);
  std::vector<Var> backward_states(kMelodySteps);
  Var h_f = tape.constant(MatrixXd::Zero(shape_.melody_hidden, size));
  for (int t = 0; t < kMelodySteps; ++t) forward_states[t] = h_f = tape.gru_step(f, inputs[t], h_f);
  Var h_b = tape.constant(MatrixXd::Zero(shape_.melody_hidden, size));
  for (int t = kMelodySteps - 1; t >= 0; --t) backward_states[t] = h_b = tape.gru_step(b, inputs[t], h_b);

  std::vector<Var> chord_losses;
  std::vector<Var> function_losses;
  std::vector<int> chord_slot(static_cast<std::size_t>(size));
  std::vector<int> function_slot(static_cast<std::size_t>(size));
  Var h = tape.constant(MatrixXd::Zero(shape_.slot_hidden, size));
  for (int s = 0; s < kHalfBars; ++s) {
    std::vector<Var> span_states;
    for (int t = s * kStepsPerHalfBar; t < (s + 1) * kStepsPerHalfBar; ++t) {
      span_states.push_back(tape.concat_rows({forward_states[t], backward_states[t]}));
    }
    h = tape.gru_step(slot, tape.mean(span_states), h);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      chord_slot[i] = chord_targets[i * kHalfBars + static_cast<std::size_t>(s)];
      function_slot[i] = function_targets[i * kHalfBars + static_cast<std::size_t>(s)];
    }
    chord_losses.push_back(tape.softmax_cross_entropy(tape.affine(chord_head, h), chord_slot, divisor));
    function_losses.push_back(tape.softmax_cross_entropy(tape.affine(function_head, h), function_slot, divisor));
  }
  const Var chords = tape.sum(chord_losses);
  const Var functions = tape.sum(function_losses);
  const std::pair<Var, double> terms[] = {{chords, 1.0}, {functions, function_weight}};
  return {tape.weighted_sum(terms), {{"chords", chords}, {"functions", functions}}};
}

std::optional<HarmonizerTargets> harmonizer_targets(const LeadSheet& sheet) {
  HarmonizerTargets targets;
  for (int s = 0; s < kHalfBars; ++s) {
    const auto& chord = sheet.chords[s];
    if (sheet.melody.half_bar_rests(s) || chord.is_no_chord()) {
      targets.chords[s] = music::kNoChordClass;
      targets.functions[s] = -1;
      continue;
    }
    const auto function = music::try_chord_function(chord, sheet.key);
    if (!function) return std::nullopt;
    targets.chords[s] = chord.class_index();
    targets.functions[s] = static_cast<int>(*function);
  }
  return targets;
}

HarmonizerTraining train_harmonizer(std::span<const LeadSheet> corpus, const TrainConfig& config,
                                    HarmonizerShape shape) {
  std::vector<MelodyLine> melodies;
  std::vector<int> chord_targets;
  std::vector<int> function_targets;
  int excluded = 0;
  for (const auto& sheet : corpus) {
    const auto targets = harmonizer_targets(sheet);
    if (!targets) {
      ++excluded;
      continue;
    }
    melodies.push_back(sheet.melody);
    chord_targets.insert(chord_targets.end(), targets->chords.begin(), targets->chords.end());
    function_targets.insert(function_targets.end(), targets->functions.begin(), targets->functions.end());
  }
  if (excluded > 0) {
    std::cerr << "warning: excluded " << excluded << " sheet(s) with non-diatonic chords\n";
  }
  if (melodies.size() < 32) throw TrainingError("harmonizer corpus needs at least 32 diatonic sheets");

  Harmonizer model = Harmonizer::initialize(config.seed, shape);
  std::vector<EpochLog> log;
  {
    nn::ParameterSet<double> params;
    model.bind(params);
    std::vector<MelodyLine> batch;
    std::vector<int> batch_chords;
    std::vector<int> batch_functions;
    log = fit(params, static_cast<int>(melodies.size()), config,
              [&](nn::Tape& tape, std::span<const int> indices, double, Rng&) {
                batch.clear();
                batch_chords.clear();
                batch_functions.clear();
                for (int i : indices) {
                  const auto at = static_cast<std::size_t>(i);
                  batch.push_back(melodies[at]);
                  for (std::size_t s = 0; s < kHalfBars; ++s) {
                    batch_chords.push_back(chord_targets[at * kHalfBars + s]);
                    batch_functions.push_back(function_targets[at * kHalfBars + s]);
                  }
                }
                return model.build_loss(tape, params, batch, batch_chords, batch_functions,
                                        config.function_weight);
              });
  }
  return {std::move(model), std::move(log), excluded};
}

HarmonizerMetrics evaluate_harmonizer(const Harmonizer& model, std::span<const LeadSheet> corpus) {
  HarmonizerMetrics metrics;
  long slots = 0, chord_hits = 0, function_slots = 0, function_hits = 0, consistent = 0, diatonic = 0;
  for (const auto& sheet : corpus) {
    const auto result = model.harmonize(sheet.melody);
    const auto targets = harmonizer_targets(sheet);
    for (int s = 0; s < kHalfBars; ++s) {
      ++slots;
      const auto& predicted = result.chords[s];
      const int reference = targets ? targets->chords[s] : sheet.chords[s].class_index();
      chord_hits += predicted.class_index() == reference;
      const auto predicted_function = music::try_chord_function(predicted, sheet.key);
      diatonic += predicted_function.has_value();
      consistent += predicted_function.has_value() && predicted_function == result.functions[s];
      if (targets && targets->functions[s] >= 0) {
        ++function_slots;
        function_hits += result.functions[s] && static_cast<int>(*result.functions[s]) == targets->functions[s];
      }
    }
  }
  if (slots > 0) {
    metrics.chord_accuracy = static_cast<double>(chord_hits) / slots;
    metrics.consistency = static_cast<double>(consistent) / slots;
    metrics.diatonic_fraction = static_cast<double>(diatonic) / slots;
  }
  if (function_slots > 0) metrics.function_accuracy = static_cast<double>(function_hits) / function_slots;
  return metrics;
}

}  // namespace musicdemo::models
