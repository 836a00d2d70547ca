#include "musicdemo/models/drum_vae.hpp"

#include <cmath>
#include <stdexcept>

namespace musicdemo::models {

namespace {

using music::kDrumInstruments;
using music::kDrumSteps;
using music::kLatentDim;

std::vector<MatrixXd> grid_columns(std::span<const DrumPattern> patterns) {
  const auto batch = static_cast<Eigen::Index>(patterns.size());
  std::vector<MatrixXd> steps(kDrumSteps, MatrixXd(kDrumInstruments, batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& grid = patterns[static_cast<std::size_t>(b)].grid();
    for (int t = 0; t < kDrumSteps; ++t) steps[t].col(b) = grid.col(t).cast<double>();
  }
  return steps;
}

MatrixXd position_code(int step, Eigen::Index batch) {
  MatrixXd code = MatrixXd::Zero(DrumVae::kPositionFeatures, batch);
  code.row(step / music::kDrumStepsPerSixteenth).setOnes();
  if (step % music::kDrumStepsPerSixteenth == 0) code.row(16).setOnes();
  return code;
}

MatrixXd stack(const MatrixXd& top, const MatrixXd& bottom) {
  MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace

template <typename F>
void DrumVae::visit(F&& f) {
  auto gru = [&](const std::string& prefix, nn::GruCell<double>& cell) {
    cell.visit([&](const char* suffix, auto& m) { f(prefix + "." + suffix, m); });
  };
  auto dense = [&](const std::string& prefix, nn::DenseLayer<double>& layer) {
    f(prefix + ".weight", layer.weight);
    f(prefix + ".bias", layer.bias);
  };
  gru("encoder.forward", encoder_forward_);
  gru("encoder.backward", encoder_backward_);
  dense("encoder.mean", mean_head_);
  dense("encoder.logvar", logvar_head_);
  dense("decoder.init", decoder_init_);
  gru("decoder.gru", decoder_);
  dense("decoder.output", output_head_);
}

DrumVae DrumVae::initialize(std::uint64_t seed, DrumVaeShape shape) {
  Rng rng(seed);
  DrumVae m;
  m.shape_ = shape;
  const int he = shape.encoder_hidden;
  const int hd = shape.decoder_hidden;
  m.encoder_forward_ = nn::make_gru_cell<double>(kDrumInstruments, he, rng);
  m.encoder_backward_ = nn::make_gru_cell<double>(kDrumInstruments, he, rng);
  m.mean_head_ = nn::make_dense<double>(2 * he, kLatentDim, rng);
  m.logvar_head_ = nn::make_dense<double>(2 * he, kLatentDim, rng);
  m.decoder_init_ = nn::make_dense<double>(kLatentDim, hd, rng);
  m.decoder_ = nn::make_gru_cell<double>(kLatentDim + kPositionFeatures, hd, rng);
  m.output_head_ = nn::make_dense<double>(hd, kDrumInstruments, rng);
  return m;
}

DrumVae DrumVae::from_weights(const nn::ModelWeights& weights) {
  require_kind(weights, kKind);
  DrumVaeShape shape;
  try {
    shape.encoder_hidden = weights.metadata.at("encoder_hidden").get<int>();
    shape.decoder_hidden = weights.metadata.at("decoder_hidden").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw nn::WeightsError(nn::WeightsError::Kind::parse, "drum-vae metadata lacks hidden sizes");
  }
  DrumVae m = initialize(0, shape);
  m.visit([&](const std::string& name, auto& storage) { weights.assign_to(name, storage); });
  return m;
}

nn::ModelWeights DrumVae::to_weights() const {
  nn::ModelWeights w;
  w.metadata = {{"kind", kKind},
                {"latent_dim", kLatentDim},
                {"encoder_hidden", shape_.encoder_hidden},
                {"decoder_hidden", shape_.decoder_hidden},
                {"instruments", kDrumInstruments},
                {"steps", kDrumSteps}};
  const_cast<DrumVae*>(this)->visit([&](const std::string& name, auto& m) { w.add(name, nn::to_tensor(m)); });
  return w;
}

void DrumVae::bind(nn::ParameterSet<double>& params) {
  visit([&](const std::string& name, auto& m) { params.add(name, m); });
}

std::pair<MatrixXd, MatrixXd> DrumVae::posterior(std::span<const DrumPattern> patterns) const {
  const auto steps = grid_columns(patterns);
  const MatrixXd summary = nn::bgru_encode<double>(encoder_forward_, encoder_backward_, steps);
  return {nn::dense(mean_head_, summary, nn::Activation::identity),
          nn::dense(logvar_head_, summary, nn::Activation::identity)};
}

LatentVector DrumVae::encode(const DrumPattern& pattern) const {
  const auto [mean, logvar] = posterior(std::span(&pattern, 1));
  return LatentVector(mean.col(0));
}

LatentVector DrumVae::encode_sampled(const DrumPattern& pattern, Rng& rng) const {
  const auto [mean, logvar] = posterior(std::span(&pattern, 1));
  return LatentVector(nn::sample_gaussian(mean, logvar, rng).col(0));
}

std::vector<MatrixXd> DrumVae::decode_probabilities(const MatrixXd& latents) const {
  if (latents.rows() != kLatentDim || !latents.allFinite()) {
    throw std::invalid_argument("decode: latent must be finite with 32 rows");
  }
  const Eigen::Index batch = latents.cols();
  MatrixXd h = nn::dense(decoder_init_, latents, nn::Activation::tanh);
  std::vector<MatrixXd> out;
  out.reserve(kDrumSteps);
  for (int t = 0; t < kDrumSteps; ++t) {
    h = nn::gru_step(decoder_, stack(latents, position_code(t, batch)), h);
    out.push_back(nn::dense(output_head_, h, nn::Activation::sigmoid));
  }
  return out;
}

DrumDecoding DrumVae::decode(const LatentVector& z) const {
  const auto probs = decode_probabilities(z.values());
  DrumDecoding result;
  for (int t = 0; t < kDrumSteps; ++t) {
    for (int i = 0; i < kDrumInstruments; ++i) {
      const double p = probs[t](i, 0);
      result.probabilities(i, t) = p;
      result.pattern.set(i, t, p >= 0.5);
    }
  }
  return result;
}

nn::LossGraph<double> DrumVae::build_loss(nn::Tape& tape, nn::ParameterSet<double>& params,
                                          std::span<const DrumPattern> batch, const MatrixXd& noise,
                                          double kl_weight) {
  const auto size = static_cast<Eigen::Index>(batch.size());
  const double divisor = static_cast<double>(size);
  const auto steps = grid_columns(batch);

  const auto enc_f = tape.parameters(encoder_forward_, params);
  const auto enc_b = tape.parameters(encoder_backward_, params);
  const auto mean_w = tape.parameters(mean_head_, params);
  const auto logvar_w = tape.parameters(logvar_head_, params);
  const auto init_w = tape.parameters(decoder_init_, params);
  const auto dec = tape.parameters(decoder_, params);
  const auto out_w = tape.parameters(output_head_, params);

  std::vector<nn::Tape::Var> inputs;
  inputs.reserve(kDrumSteps);
  for (const auto& s : steps) inputs.push_back(tape.constant(s));

  auto h_f = tape.constant(MatrixXd::Zero(shape_.encoder_hidden, size));
  for (int t = 0; t < kDrumSteps; ++t) h_f = tape.gru_step(enc_f, inputs[t], h_f);
  auto h_b = tape.constant(MatrixXd::Zero(shape_.encoder_hidden, size));
  for (int t = kDrumSteps - 1; t >= 0; --t) h_b = tape.gru_step(enc_b, inputs[t], h_b);
  const auto summary = tape.concat_rows({h_f, h_b});

  const auto mean = tape.affine(mean_w, summary);
  const auto logvar = tape.affine(logvar_w, summary);
  const auto z = tape.reparameterize(mean, logvar, noise);

  auto h = tape.tanh(tape.affine(init_w, z));
  std::vector<nn::Tape::Var> step_losses;
  step_losses.reserve(kDrumSteps);
  for (int t = 0; t < kDrumSteps; ++t) {
    const auto x = tape.concat_rows({z, tape.constant(position_code(t, size))});
    h = tape.gru_step(dec, x, h);
    const auto logits = tape.affine(out_w, h);
    step_losses.push_back(tape.sigmoid_cross_entropy(logits, steps[t], divisor));
  }
  const auto reconstruction = tape.sum(step_losses);
  const auto kl = tape.kl_standard_normal(mean, logvar, divisor);
  const std::pair<nn::Tape::Var, double> terms[] = {{reconstruction, 1.0}, {kl, kl_weight}};
  return {tape.weighted_sum(terms), {{"reconstruction", reconstruction}, {"kl", kl}}};
}

LatentVector set_latent_dim(const LatentVector& z, int index, double value) {
  if (index < 0 || index >= kLatentDim) throw std::out_of_range("latent index out of range");
  if (std::isnan(value)) throw std::invalid_argument("latent value must be a number");
  music::LatentValues values = z.values();
  values(index) = std::clamp(value, -music::kLatentLimit, music::kLatentLimit);
  return LatentVector(values);
}

PriorSample sample_prior(const DrumVae& model, Rng& rng) {
  const LatentVector z(nn::standard_normal<double>(kLatentDim, 1, rng).col(0));
  return {z, model.decode(z)};
}

DrumTraining train_drum_vae(std::span<const DrumPattern> corpus, const TrainConfig& config, DrumVaeShape shape) {
  if (corpus.size() < 16) throw TrainingError("drum corpus needs at least 16 patterns");
  DrumVae model = DrumVae::initialize(config.seed, shape);
  std::vector<EpochLog> log;
  {
    nn::ParameterSet<double> params;
    model.bind(params);
    std::vector<DrumPattern> batch;
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

double onset_f1(std::span<const DrumPattern> reference, std::span<const DrumPattern> predicted) {
  if (reference.size() != predicted.size()) throw std::invalid_argument("onset_f1: size mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const auto r = reference[k].grid().array() != 0;
    const auto p = predicted[k].grid().array() != 0;
    tp += (r && p).count();
    fp += (!r && p).count();
    fn += (r && !p).count();
  }
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

DrumMetrics evaluate_drum_vae(const DrumVae& model, std::span<const DrumPattern> corpus) {
  DrumMetrics metrics;
  const auto [mean, logvar] = model.posterior(corpus);
  const auto probs = model.decode_probabilities(mean);
  std::vector<DrumPattern> reconstructed(corpus.size());
  double bce = 0;
  for (int t = 0; t < kDrumSteps; ++t) {
    for (std::size_t b = 0; b < corpus.size(); ++b) {
      for (int i = 0; i < kDrumInstruments; ++i) {
        const double p = std::clamp(probs[t](i, static_cast<Eigen::Index>(b)), 1e-12, 1 - 1e-12);
        const bool on = corpus[b].at(i, t);
        bce -= on ? std::log(p) : std::log(1 - p);
        reconstructed[b].set(i, t, p >= 0.5);
      }
    }
  }
  const double n = static_cast<double>(corpus.size());
  metrics.f1 = onset_f1(corpus, reconstructed);
  metrics.kl_per_dim = nn::kl_divergence(mean, logvar) / (n * kLatentDim);
  metrics.reconstruction_bce = bce / n;
  return metrics;
}

}  // namespace musicdemo::models
