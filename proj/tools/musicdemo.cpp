// musicdemo: serve the demos, train the three models, evaluate checkpoints,
// and regenerate the bundled corpora.

#include "musicdemo/models/drum_vae.hpp"
#include "musicdemo/models/harmonizer.hpp"
#include "musicdemo/models/leadsheet_vae.hpp"
#include "musicdemo/music/corpus.hpp"
#include "musicdemo/server/http.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

namespace {

using namespace musicdemo;

struct TrainOptions {
  std::string model;
  std::string corpus;
  std::string out;
  std::uint64_t seed = 1;
  int epochs = 0;
  double beta = -1;
  double lr = -1;
  int batch = 0;
  bool quiet = false;
};

void print_metrics(const std::string& kind, const nn::ModelWeights& weights, const std::string& corpus) {
  if (kind == models::DrumVae::kKind) {
    const auto model = models::DrumVae::from_weights(weights);
    const auto data = music::read_drum_corpus(corpus);
    const auto m = models::evaluate_drum_vae(model, data);
    std::printf("drum-vae  patterns=%zu  f1=%.4f  kl_per_dim=%.4f  reconstruction_bce=%.4f\n", data.size(), m.f1,
                m.kl_per_dim, m.reconstruction_bce);
  } else if (kind == models::LeadSheetVae::kKind) {
    const auto model = models::LeadSheetVae::from_weights(weights);
    const auto data = music::read_leadsheet_corpus(corpus);
    const auto m = models::evaluate_leadsheet_vae(model, data);
    std::printf("leadsheet-vae  sheets=%zu  melody_accuracy=%.4f  chord_accuracy=%.4f (%.2f/8)  kl_per_dim=%.4f\n",
                data.size(), m.melody_accuracy, m.chord_accuracy, 8 * m.chord_accuracy, m.kl_per_dim);
  } else if (kind == models::Harmonizer::kKind) {
    const auto model = models::Harmonizer::from_weights(weights);
    const auto data = music::read_leadsheet_corpus(corpus);
    const auto m = models::evaluate_harmonizer(model, data);
    std::printf("harmonizer  sheets=%zu  chord_accuracy=%.4f  function_accuracy=%.4f  consistency=%.4f  "
                "diatonic=%.4f\n",
                data.size(), m.chord_accuracy, m.function_accuracy, m.consistency, m.diatonic_fraction);
  } else {
    throw std::runtime_error("unknown model kind '" + kind + "'");
  }
}

int run_train(const TrainOptions& opt) {
  models::TrainConfig config = models::shipped_config(opt.model);
  config.seed = opt.seed;
  if (opt.epochs > 0) config.epochs = opt.epochs;
  if (opt.beta >= 0) config.beta = opt.beta;
  if (opt.lr > 0) config.learning_rate = opt.lr;
  if (opt.batch > 0) config.batch_size = opt.batch;
  if (!opt.quiet) config.progress = [](const std::string& line) { std::cerr << line << '\n'; };

  const auto start = std::chrono::steady_clock::now();
  nn::ModelWeights weights;
  if (opt.model == "drum") {
    const auto corpus = music::read_drum_corpus(opt.corpus);
    weights = models::train_drum_vae(corpus, config).model.to_weights();
  } else if (opt.model == "leadsheet") {
    const auto corpus = music::read_leadsheet_corpus(opt.corpus);
    weights = models::train_leadsheet_vae(corpus, config).model.to_weights();
  } else {
    const auto corpus = music::read_leadsheet_corpus(opt.corpus);
    weights = models::train_harmonizer(corpus, config).model.to_weights();
  }
  weights.metadata["train"] = {{"seed", config.seed},
                               {"epochs", config.epochs},
                               {"learning_rate", config.learning_rate},
                               {"batch_size", config.batch_size},
                               {"beta", config.beta}};
  nn::save_weights(weights, opt.out);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("wrote %s (%.1f s)\n", opt.out.c_str(), seconds);
  print_metrics(weights.kind(), weights, opt.corpus);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive symbolic-music model demos"};
  app.require_subcommand(1);

  server::ServerOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the REST demo server");
  serve->add_option("--port", serve_opts.port, "Listen port")->envname("MUSICDEMO_PORT");
  serve->add_option("--host", serve_opts.host, "Bind address")->envname("MUSICDEMO_HOST");
  serve->add_option("--weights-dir", serve_opts.weights_dir, "Directory of *.weights files")
      ->envname("MUSICDEMO_WEIGHTS_DIR");
  serve->add_option("--corpus-dir", serve_opts.corpus_dir, "Directory holding drums.jsonl and leadsheets.jsonl")
      ->envname("MUSICDEMO_CORPUS_DIR");
  serve->add_option("--static-dir", serve_opts.static_dir, "Client bundle root")->envname("MUSICDEMO_STATIC_DIR");

  TrainOptions train_opts;
  auto* train = app.add_subcommand("train", "Train a model and write its weight file");
  train->add_option("model", train_opts.model, "drum | leadsheet | harmonizer")
      ->required()
      ->check(CLI::IsMember({"drum", "leadsheet", "harmonizer"}));
  train->add_option("--corpus", train_opts.corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_opts.out, "Output weight file")->required();
  train->add_option("--seed", train_opts.seed, "Seed for initialisation, shuffling and noise");
  train->add_option("--epochs", train_opts.epochs, "Epoch count (model default if omitted)");
  train->add_option("--beta", train_opts.beta, "KL weight after warm-up");
  train->add_option("--lr", train_opts.lr, "Adam learning rate");
  train->add_option("--batch", train_opts.batch, "Minibatch size");
  train->add_flag("--quiet", train_opts.quiet, "No per-epoch progress");

  std::string eval_weights;
  std::string eval_corpus;
  auto* eval = app.add_subcommand("eval", "Print evaluation metrics of a weight file on a corpus");
  eval->add_option("model", eval_weights, "Weight file")->required()->check(CLI::ExistingFile);
  eval->add_option("--corpus", eval_corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);

  std::string corpus_kind;
  std::string corpus_out;
  int corpus_count = 0;
  std::uint64_t corpus_seed = 7;
  auto* corpus = app.add_subcommand("corpus", "Generate a synthetic corpus");
  corpus->add_option("kind", corpus_kind, "drum | leadsheet")->required()->check(CLI::IsMember({"drum", "leadsheet"}));
  corpus->add_option("--out", corpus_out, "Output JSONL file")->required();
  corpus->add_option("--count", corpus_count, "Number of items (64 drums / 128 sheets by default)");
  corpus->add_option("--seed", corpus_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return server::run_server(serve_opts);
    if (*train) return run_train(train_opts);
    if (*eval) {
      const auto weights = nn::load_weights(eval_weights);
      print_metrics(weights.kind(), weights, eval_corpus);
      return 0;
    }
    if (*corpus) {
      if (corpus_kind == "drum") {
        music::write_corpus(corpus_out, music::generate_drum_corpus(corpus_count > 0 ? corpus_count : 64, corpus_seed));
      } else {
        music::write_corpus(corpus_out,
                            music::generate_leadsheet_corpus(corpus_count > 0 ? corpus_count : 128, corpus_seed));
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
