#include "musicdemo/models/leadsheet_vae.hpp"

#include <cmath>
#include <stdexcept>

namespace musicdemo::models {

namespace {

using music::kChordVocab;
using music::kHalfBars;
using music::kLatentDim;
using music::kMelodySteps;
using music::kMelodyVocab;
using music::kStepsPerHalfBar;

MatrixXd melody_position(int step, Eigen::Index batch) {
  MatrixXd code = MatrixXd::Zero(LeadSheetVae::kMelodyPositionFeatures, batch);
  code.row(step % music::kStepsPerBar).setOnes();
  code.row(music::kStepsPerBar + step / music::kStepsPerBar).setOnes();
  return code;
}

MatrixXd chord_position(int slot, Eigen::Index batch) {
  MatrixXd code = MatrixXd::Zero(LeadSheetVae::kChordPositionFeatures, batch);
  code.row(slot).setOnes();
  return code;
}

MatrixXd stack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

std::vector<const music::MelodyLine*> melodies_of(std::span<const LeadSheet> sheets) {
  std::vector<const music::MelodyLine*> out;
  for (const auto& s : sheets) out.push_back(&s.melody);
  return out;
}

std::vector<const music::ChordSequence*> chords_of(std::span<const LeadSheet> sheets) {
  std::vector<const music::ChordSequence*> out;
  for (const auto& s : sheets) out.push_back(&s.chords);
  return out;
}

}  // namespace

std::vector<MatrixXd> melody_one_hot_steps(std::span<const music::MelodyLine* const> melodies) {
  const auto batch = static_cast<Eigen::Index>(melodies.size());
  std::vector<MatrixXd> steps(kMelodySteps, MatrixXd::Zero(kMelodyVocab, batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& melody = *melodies[static_cast<std::size_t>(b)];
    for (int t = 0; t < kMelodySteps; ++t) steps[t](melody[t], b) = 1.0;
  }
  return steps;
}

std::vector<MatrixXd> chroma_steps(std::span<const music::ChordSequence* const> chords) {
  const auto batch = static_cast<Eigen::Index>(chords.size());
  std::vector<MatrixXd> steps(kMelodySteps, MatrixXd::Zero(12, batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const music::ChromaRows chroma = chords[static_cast<std::size_t>(b)]->chroma();
    for (int t = 0; t < kMelodySteps; ++t) {
      steps[t].col(b) = chroma.row(t / kStepsPerHalfBar).transpose().cast<double>();
    }
  }
  return steps;
}

template <typename F>
void LeadSheetVae::visit(F&& f) {
  auto gru = [&](const std::string& prefix, nn::GruCell<double>& cell) {
    cell.visit([&](const char* suffix, auto& m) { f(prefix + "." + suffix, m); });
  };
  auto dense = [&](const std::string& prefix, nn::DenseLayer<double>& layer) {
    f(prefix + ".weight", layer.weight);
    f(prefix + ".bias", layer.bias);
  };
  gru("encoder.melody.forward", melody_forward_);
  gru("encoder.melody.backward", melody_backward_);
  gru("encoder.chords.forward", chord_forward_);
  gru("encoder.chords.backward", chord_backward_);
  dense("encoder.fusion", fusion_);
  dense("encoder.mean", mean_head_);
  dense("encoder.logvar", logvar_head_);
  dense("decoder.melody.init", melody_init_);
  gru("decoder.melody.gru", melody_decoder_);
  dense("decoder.melody.output", melody_output_);
  dense("decoder.chords.init", chord_init_);
  gru("decoder.chords.gru", chord_decoder_);
  dense("decoder.chords.output", chord_output_);
}

LeadSheetVae LeadSheetVae::initialize(std::uint64_t seed, LeadSheetVaeShape shape) {
  Rng rng(seed);
  LeadSheetVae m;
  m.shape_ = shape;
  const int he = shape.encoder_hidden;
  m.melody_forward_ = nn::make_gru_cell<double>(kMelodyVocab, he, rng);
  m.melody_backward_ = nn::make_gru_cell<double>(kMelodyVocab, he, rng);
  m.chord_forward_ = nn::make_gru_cell<double>(12, he, rng);
  m.chord_backward_ = nn::make_gru_cell<double>(12, he, rng);
  m.fusion_ = nn::make_dense<double>(4 * he, shape.fusion_hidden, rng);
  m.mean_head_ = nn::make_dense<double>(shape.fusion_hidden, kLatentDim, rng);
  m.logvar_head_ = nn::make_dense<double>(shape.fusion_hidden, kLatentDim, rng);
  m.melody_init_ = nn::make_dense<double>(kLatentDim, shape.melody_decoder_hidden, rng);
  m.melody_decoder_ =
      nn::make_gru_cell<double>(kLatentDim + kMelodyPositionFeatures, shape.melody_decoder_hidden, rng);
  m.melody_output_ = nn::make_dense<double>(shape.melody_decoder_hidden, kMelodyVocab, rng);
  m.chord_init_ = nn::make_dense<double>(kLatentDim, shape.chord_decoder_hidden, rng);
  m.chord_decoder_ = nn::make_gru_cell<double>(kLatentDim + kChordPositionFeatures, shape.chord_decoder_hidden, rng);
  m.chord_output_ = nn::make_dense<double>(shape.chord_decoder_hidden, kChordVocab, rng);
  return m;
}

LeadSheetVae LeadSheetVae::from_weights(const nn::ModelWeights& weights) {
  require_kind(weights, kKind);
  LeadSheetVaeShape shape;
  try {
    shape.encoder_hidden = weights.metadata.at("encoder_hidden").get<int>();
    shape.fusion_hidden = weights.metadata.at("fusion_hidden").get<int>();
    shape.melody_decoder_hidden = weights.metadata.at("melody_decoder_hidden").get<int>();
    shape.chord_decoder_hidden = weights.metadata.at("chord_decoder_hidden").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw nn::WeightsError(nn::WeightsError::Kind::parse, "leadsheet-vae metadata lacks hidden sizes");
  }
  LeadSheetVae m = initialize(0, shape);
  m.visit([&](const std::string& name, auto& storage) { weights.assign_to(name, storage); });
  return m;
}

nn::ModelWeights LeadSheetVae::to_weights() const {
  nn::ModelWeights w;
  w.metadata = {{"kind", kKind},
                {"latent_dim", kLatentDim},
                {"melody_vocab", kMelodyVocab},
                {"chord_vocab", kChordVocab},
                {"encoder_hidden", shape_.encoder_hidden},
                {"fusion_hidden", shape_.fusion_hidden},
                {"melody_decoder_hidden", shape_.melody_decoder_hidden},
                {"chord_decoder_hidden", shape_.chord_decoder_hidden}};
  const_cast<LeadSheetVae*>(this)->visit([&](const std::string& name, auto& m) { w.add(name, nn::to_tensor(m)); });
  return w;
}

void LeadSheetVae::bind(nn::ParameterSet<double>& params) {
  visit([&](const std::string& name, auto& m) { params.add(name, m); });
}

std::pair<MatrixXd, MatrixXd> LeadSheetVae::posterior(std::span<const LeadSheet> sheets) const {
  const auto melodies = melodies_of(sheets);
  const auto chords = chords_of(sheets);
  const auto melody_steps = melody_one_hot_steps(melodies);
  const auto chord_steps = chroma_steps(chords);
  const MatrixXd m = nn::bgru_encode<double>(melody_forward_, melody_backward_, melody_steps);
  const MatrixXd c = nn::bgru_encode<double>(chord_forward_, chord_backward_, chord_steps);
  const MatrixXd hidden = nn::dense(fusion_, stack(m, c), nn::Activation::tanh);
  return {nn::dense(mean_head_, hidden, nn::Activation::identity),
          nn::dense(logvar_head_, hidden, nn::Activation::identity)};
}

LatentVector LeadSheetVae::encode(const LeadSheet& sheet) const {
  return LatentVector(posterior(std::span(&sheet, 1)).first.col(0));
}

LatentVector LeadSheetVae::encode_sampled(const LeadSheet& sheet, Rng& rng) const {
  const auto [mean, logvar] = posterior(std::span(&sheet, 1));
  return LatentVector(nn::sample_gaussian(mean, logvar, rng).col(0));
}

std::vector<LeadSheet> LeadSheetVae::decode_batch(const MatrixXd& latents) const {
  if (latents.rows() != kLatentDim || !latents.allFinite()) {
    throw std::invalid_argument("decode: latent must be finite with 32 rows");
  }
  const Eigen::Index batch = latents.cols();
  std::vector<std::array<int, kMelodySteps>> tokens(static_cast<std::size_t>(batch));
  std::vector<std::array<music::ChordSymbol, kHalfBars>> chords(static_cast<std::size_t>(batch));

  MatrixXd h = nn::dense(melody_init_, latents, nn::Activation::tanh);
  for (int t = 0; t < kMelodySteps; ++t) {
    h = nn::gru_step(melody_decoder_, stack(latents, melody_position(t, batch)), h);
    const auto best = argmax_columns(nn::dense(melody_output_, h, nn::Activation::identity));
    for (std::size_t b = 0; b < best.size(); ++b) tokens[b][t] = best[b];
  }
  MatrixXd hc = nn::dense(chord_init_, latents, nn::Activation::tanh);
  for (int s = 0; s < kHalfBars; ++s) {
    hc = nn::gru_step(chord_decoder_, stack(latents, chord_position(s, batch)), hc);
    const auto best = argmax_columns(nn::dense(chord_output_, hc, nn::Activation::identity));
    for (std::size_t b = 0; b < best.size(); ++b) chords[b][s] = music::ChordSymbol::from_class_index(best[b]);
  }

  std::vector<LeadSheet> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (std::size_t b = 0; b < static_cast<std::size_t>(batch); ++b) {
    LeadSheet sheet;
    sheet.melody = music::MelodyLine::repaired(tokens[b]);
    sheet.chords = music::ChordSequence(chords[b]);
    sheet.key = 0;
    out.push_back(std::move(sheet));
  }
  return out;
}

LeadSheet LeadSheetVae::decode(const LatentVector& z) const { return decode_batch(z.values()).front(); }

nn::LossGraph<double> LeadSheetVae::build_loss(nn::Tape& tape, nn::ParameterSet<double>& params,
                                               std::span<const LeadSheet> batch, const MatrixXd& noise,
                                               double kl_weight) {
  using Var = nn::Tape::Var;
  const auto size = static_cast<Eigen::Index>(batch.size());
  const double divisor = static_cast<double>(size);
  const auto melody_steps = melody_one_hot_steps(melodies_of(batch));
  const auto chord_steps = chroma_steps(chords_of(batch));

  auto encode_stream = [&](nn::GruCell<double>& fwd, nn::GruCell<double>& bwd, const std::vector<MatrixXd>& steps) {
    const auto f = tape.parameters(fwd, params);
    const auto b = tape.parameters(bwd, params);
    std::vector<Var> inputs;
    for (const auto& s : steps) inputs.push_back(tape.constant(s));
    Var h_f = tape.constant(MatrixXd::Zero(fwd.hidden_size(), size));
    for (const Var& x : inputs) h_f = tape.gru_step(f, x, h_f);
    Var h_b = tape.constant(MatrixXd::Zero(bwd.hidden_size(), size));
    for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) h_b = tape.gru_step(b, *it, h_b);
    return std::pair{h_f, h_b};
  };
  const auto [mf, mb] = encode_stream(melody_forward_, melody_backward_, melody_steps);
  const auto [cf, cb] = encode_stream(chord_forward_, chord_backward_, chord_steps);
  const Var hidden = tape.tanh(tape.affine(tape.parameters(fusion_, params), tape.concat_rows({mf, mb, cf, cb})));
  const Var mean = tape.affine(tape.parameters(mean_head_, params), hidden);
  const Var logvar = tape.affine(tape.parameters(logvar_head_, params), hidden);
  const Var z = tape.reparameterize(mean, logvar, noise);

  std::vector<Var> melody_losses;
  {
    const auto dec = tape.parameters(melody_decoder_, params);
    const auto out = tape.parameters(melody_output_, params);
    Var h = tape.tanh(tape.affine(tape.parameters(melody_init_, params), z));
    std::vector<int> targets(static_cast<std::size_t>(size));
    for (int t = 0; t < kMelodySteps; ++t) {
      h = tape.gru_step(dec, tape.concat_rows({z, tape.constant(melody_position(t, size))}), h);
      for (std::size_t b = 0; b < batch.size(); ++b) targets[b] = batch[b].melody[t];
      melody_losses.push_back(tape.softmax_cross_entropy(tape.affine(out, h), targets, divisor));
    }
  }
  std::vector<Var> chord_losses;
  {
    const auto dec = tape.parameters(chord_decoder_, params);
    const auto out = tape.parameters(chord_output_, params);
    Var h = tape.tanh(tape.affine(tape.parameters(chord_init_, params), z));
    std::vector<int> targets(static_cast<std::size_t>(size));
    for (int s = 0; s < kHalfBars; ++s) {
      h = tape.gru_step(dec, tape.concat_rows({z, tape.constant(chord_position(s, size))}), h);
      for (std::size_t b = 0; b < batch.size(); ++b) targets[b] = batch[b].chords[s].class_index();
      chord_losses.push_back(tape.softmax_cross_entropy(tape.affine(out, h), targets, divisor));
    }
  }
  const Var melody = tape.sum(melody_losses);
  const Var chords = tape.sum(chord_losses);
  const Var kl = tape.kl_standard_normal(mean, logvar, divisor);
  const std::pair<Var, double> terms[] = {{melody, 1.0}, {chords, 1.0}, {kl, kl_weight}};
  return {tape.weighted_sum(terms), {{"melody", melody}, {"chords", chords}, {"kl", kl}}};
}

LeadSheetTraining train_leadsheet_vae(std::span<const LeadSheet> corpus, const TrainConfig& config,
                                      LeadSheetVaeShape shape) {
  if (corpus.size() < 32) throw TrainingError("lead-sheet corpus needs at least 32 sheets");
  LeadSheetVae model = LeadSheetVae::initialize(config.seed, shape);
  std::vector<EpochLog> log;
  {
    nn::ParameterSet<double> params;
    model.bind(params);
    std::vector<LeadSheet> batch;
    log = fit(params, static_cast<int>(corpus.size()), config,
              [&](nn::Tape& tape, std::span<const int> indices, double kl_weight, Rng& rng) {
                batch.clear();
                for (int i : indices) batch.push_back(corpus[static_cast<std::size_t>(i)]);
                const MatrixXd noise =
                    nn::standard_normal<double>(kLatentDim, static_cast<Eigen::Index>(batch.size()), rng);
                return model.build_loss(tape, params, batch, noise, kl_weight);
              });
  }
  return {std::move(model), std::move(log)};
}

LeadSheetMetrics evaluate_leadsheet_vae(const LeadSheetVae& model, std::span<const LeadSheet> corpus) {
  LeadSheetMetrics metrics;
  if (corpus.empty()) return metrics;
  const auto [mean, logvar] = model.posterior(corpus);
  const auto decoded = model.decode_batch(mean);
  long melody_hits = 0;
  long chord_hits = 0;
  for (std::size_t b = 0; b < corpus.size(); ++b) {
    for (int t = 0; t < kMelodySteps; ++t) melody_hits += decoded[b].melody[t] == corpus[b].melody[t];
    for (int s = 0; s < kHalfBars; ++s) chord_hits += decoded[b].chords[s] == corpus[b].chords[s];
  }
  const double n = static_cast<double>(corpus.size());
  metrics.melody_accuracy = static_cast<double>(melody_hits) / (n * kMelodySteps);
  metrics.chord_accuracy = static_cast<double>(chord_hits) / (n * kHalfBars);
  metrics.kl_per_dim = nn::kl_divergence(mean, logvar) / (n * kLatentDim);
  return metrics;
}

}  // namespace musicdemo::models
