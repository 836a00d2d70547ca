#include "musicdemo/models/common.hpp"

#include <cstdio>

namespace musicdemo::models {

TrainConfig shipped_config(std::string_view model) {
  TrainConfig config;
  config.learning_rate = 3e-3;
  if (model == "drum") {
    config.epochs = 150;
  } else if (model == "leadsheet") {
    config.epochs = 120;
  } else if (model == "harmonizer") {
    config.epochs = 60;
  } else {
    throw std::invalid_argument("unknown model '" + std::string(model) + "'");
  }
  return config;
}

double EpochLog::term(std::string_view name) const {
  for (const auto& [n, v] : terms) {
    if (n == name) return v;
  }
  throw std::out_of_range("no logged term " + std::string(name));
}

std::vector<EpochLog> fit(nn::ParameterSet<double>& params, int sample_count, const TrainConfig& config,
                          const std::function<nn::LossGraph<double>(nn::Tape&, std::span<const int>, double, Rng&)>& build) {
  if (config.batch_size <= 0 || config.epochs < 0) throw TrainingError("invalid batch size or epoch count");
  Rng rng(config.seed);
  nn::Adam<double> optimizer;
  const long batches_per_epoch = (sample_count + config.batch_size - 1) / config.batch_size;
  const long total_steps = batches_per_epoch * config.epochs;

  std::vector<EpochLog> log;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch + 1;
    int batches = 0;
    for (const auto& batch : nn::minibatches(sample_count, config.batch_size, rng)) {
      const double weight = nn::kl_weight(config.beta, step, total_steps, config.warmup_fraction);
      const auto loss = nn::train_step<double>(params, optimizer, config.learning_rate,
                                               [&](nn::Tape& tape) { return build(tape, batch, weight, rng); });
      ++step;
      ++batches;
      entry.total += loss.total;
      if (entry.terms.empty()) {
        entry.terms = loss.terms;
      } else {
        for (std::size_t i = 0; i < loss.terms.size(); ++i) entry.terms[i].second += loss.terms[i].second;
      }
    }
    if (batches > 0) {
      entry.total /= batches;
      for (auto& [name, value] : entry.terms) value /= batches;
    }
    if (config.progress) {
      std::string line = "epoch " + std::to_string(entry.epoch) + " total " + std::to_string(entry.total);
      for (const auto& [name, value] : entry.terms) line += " " + name + " " + std::to_string(value);
      config.progress(line);
    }
    log.push_back(std::move(entry));
  }
  return log;
}

MatrixXd one_hot(std::span<const int> ids, int classes) {
  MatrixXd out = MatrixXd::Zero(classes, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t c = 0; c < ids.size(); ++c) out(ids[c], static_cast<Eigen::Index>(c)) = 1.0;
  return out;
}

void require_kind(const nn::ModelWeights& weights, std::string_view kind) {
  if (weights.kind() != kind) {
    throw nn::WeightsError(nn::WeightsError::Kind::parse,
                           "expected model kind '" + std::string(kind) + "', found '" + weights.kind() + "'");
  }
}

std::vector<int> argmax_columns(const MatrixXd& m) {
  std::vector<int> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index best = 0;
    m.col(c).maxCoeff(&best);
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace musicdemo::models
