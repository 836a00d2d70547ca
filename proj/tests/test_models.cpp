#include "musicdemo/models/drum_vae.hpp"
#include "musicdemo/models/harmonizer.hpp"
#include "musicdemo/models/interpolation.hpp"
#include "musicdemo/models/leadsheet_vae.hpp"
#include "musicdemo/music/corpus.hpp"
#include "musicdemo/music/theory.hpp"
#include "musicdemo/music/wire.hpp"
#include "support/oracles.hpp"
#include "support/random_values.hpp"

#include <doctest.h>

using namespace musicdemo;
using namespace musicdemo::models;
using music::LatentValues;

namespace {

constexpr DrumVaeShape kTinyDrum{6, 8};
constexpr LeadSheetVaeShape kTinySheet{6, 8, 8, 6};
constexpr HarmonizerShape kTinyHarmonizer{6, 6};

// Whole-model losses are O(100), so finite differences carry ~1e-9 of noise.
constexpr double kModelGradFloor = 1e-5;

}  // namespace

TEST_SUITE("drum-vae") {
  TEST_CASE("encode is deterministic and 32-dimensional") {
    const auto model = DrumVae::initialize(1);
    std::mt19937_64 rng(1);
    const auto x = testgen::random_drum(rng);
    const auto a = model.encode(x);
    CHECK(a.values().size() == 32);
    CHECK(a == model.encode(x));
    Rng noise(5);
    CHECK_FALSE(model.encode_sampled(x, noise) == a);
  }

  TEST_CASE("decode shape and determinism") {
    const auto model = DrumVae::initialize(2, kTinyDrum);
    std::mt19937_64 rng(2);
    const auto z = testgen::random_latent(rng);
    const auto a = model.decode(z);
    CHECK(a.probabilities.rows() == 9);
    CHECK(a.probabilities.cols() == 96);
    CHECK(a.pattern == model.decode(z).pattern);
    CHECK(a.probabilities == model.decode(z).probabilities);
    for (int i = 0; i < 9; ++i) {
      for (int t = 0; t < 96; ++t) CHECK(a.pattern.at(i, t) == (a.probabilities(i, t) >= 0.5));
    }
  }

  TEST_CASE("batched posterior agrees with single encodes") {
    const auto model = DrumVae::initialize(3, kTinyDrum);
    std::mt19937_64 rng(3);
    std::vector<music::DrumPattern> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(testgen::random_drum(rng));
    const auto [mean, logvar] = model.posterior(xs);
    for (int i = 0; i < 4; ++i) CHECK((mean.col(i) - model.encode(xs[static_cast<std::size_t>(i)]).values()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("set_latent_dim") {
    std::mt19937_64 rng(4);
    const auto z = testgen::random_latent(rng);
    CHECK(set_latent_dim(z, 7, z[7]) == z);
    const auto clamped = set_latent_dim(z, 0, 9.0);
    CHECK(clamped[0] == 4.0);
    CHECK(set_latent_dim(z, 0, -9.0)[0] == -4.0);
    const auto edited = set_latent_dim(z, 5, 1.25);
    CHECK(edited[5] == 1.25);
    for (int i = 0; i < 32; ++i) {
      if (i != 5) CHECK(edited[i] == z[i]);
    }
    CHECK_THROWS_AS(set_latent_dim(z, 32, 0.0), std::out_of_range);
    CHECK_THROWS_AS(set_latent_dim(z, -1, 0.0), std::out_of_range);
    CHECK_THROWS(set_latent_dim(z, 1, std::numeric_limits<double>::quiet_NaN()));
  }

  TEST_CASE("no-op edit decodes identically") {
    const auto model = DrumVae::initialize(5, kTinyDrum);
    std::mt19937_64 rng(5);
    for (int n = 0; n < 10; ++n) {
      const auto z = testgen::random_latent(rng);
      const int i = n % 32;
      CHECK(model.decode(set_latent_dim(z, i, z[i])).pattern == model.decode(z).pattern);
    }
  }

  TEST_CASE("prior samples are seeded") {
    const auto model = DrumVae::initialize(6, kTinyDrum);
    Rng a(77);
    Rng b(77);
    const auto s1 = sample_prior(model, a);
    const auto s2 = sample_prior(model, b);
    CHECK(s1.latent == s2.latent);
    CHECK(s1.decoding.pattern == s2.decoding.pattern);
    CHECK(s1.latent.values().size() == 32);
  }

  TEST_CASE("encoded latents survive the wire") {
    const auto model = DrumVae::initialize(7, kTinyDrum);
    std::mt19937_64 rng(7);
    const auto z = model.encode(testgen::random_drum(rng));
    const auto back = music::deserialize<music::LatentVector>(music::serialize(z));
    CHECK((back.values() - z.values()).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("weights round trip") {
    const auto model = DrumVae::initialize(8, kTinyDrum);
    const auto w = model.to_weights();
    CHECK(w.kind() == "drum-vae");
    CHECK(w.metadata.at("latent_dim") == 32);
    const auto back = DrumVae::from_weights(nn::decode_weights(nn::encode_weights(w)));
    CHECK(back.to_weights() == w);
    std::mt19937_64 rng(8);
    const auto z = testgen::random_latent(rng);
    CHECK(back.decode(z).probabilities == model.decode(z).probabilities);
    CHECK_THROWS_AS(Harmonizer::from_weights(w), nn::WeightsError);
  }

  TEST_CASE("loss gradients match finite differences") {
    auto model = DrumVae::initialize(9, kTinyDrum);
    std::mt19937_64 rng(9);
    const std::vector<music::DrumPattern> batch = {testgen::random_drum(rng), testgen::random_drum(rng)};
    Rng noise_rng(9);
    const MatrixXd noise = nn::standard_normal<double>(32, 2, noise_rng);
    nn::ParameterSet<double> params;
    model.bind(params);
    const auto check = oracle::gradient_check(
        params, [&](nn::Tape& tape) { return model.build_loss(tape, params, batch, noise, 0.3).total; }, 1e-4, 4, kModelGradFloor);
    INFO(check.worst);
    CHECK(check.max_rel_error < 1e-3);
  }

  TEST_CASE("training needs 16 patterns") {
    const auto corpus = music::generate_drum_corpus(15, 1);
    CHECK_THROWS_AS(train_drum_vae(corpus, TrainConfig{}), TrainingError);
  }

  TEST_CASE("short training lowers the reconstruction loss and is reproducible") {
    const auto corpus = music::generate_drum_corpus(16, 1);
    TrainConfig config;
    config.epochs = 10;
    config.learning_rate = 3e-3;
    const auto a = train_drum_vae(corpus, config, kTinyDrum);
    const auto b = train_drum_vae(corpus, config, kTinyDrum);
    CHECK(a.log.size() == 10);
    CHECK(a.log.back().term("reconstruction") < a.log.front().term("reconstruction"));
    CHECK(a.model.to_weights() == b.model.to_weights());
  }

  TEST_CASE("onset F1") {
    music::DrumPattern ref;
    ref.set(0, 0, true);
    ref.set(1, 24, true);
    music::DrumPattern pred;
    pred.set(0, 0, true);
    pred.set(2, 5, true);
    const music::DrumPattern refs[] = {ref};
    const music::DrumPattern preds[] = {pred};
    CHECK(onset_f1(refs, preds) == doctest::Approx(0.5));
    CHECK(onset_f1(refs, refs) == 1.0);
  }
}

TEST_SUITE("leadsheet-vae") {
  TEST_CASE("encode and decode shapes") {
    const auto model = LeadSheetVae::initialize(1, kTinySheet);
    std::mt19937_64 rng(1);
    const auto x = testgen::random_leadsheet(rng);
    const auto z = model.encode(x);
    CHECK(z == model.encode(x));
    const auto out = model.decode(z);
    CHECK(out.melody.tokens().size() == 64);
    CHECK(out.chords.chords().size() == 8);
    CHECK(out == model.decode(z));
    for (int s = 0; s < 8; ++s) CHECK(out.chords.chroma().row(s).transpose() == music::chord_to_chroma(out.chords[s]));
  }

  TEST_CASE("batched decode matches single decode") {
    const auto model = LeadSheetVae::initialize(2, kTinySheet);
    std::mt19937_64 rng(2);
    MatrixXd zs(32, 3);
    for (int c = 0; c < 3; ++c) zs.col(c) = testgen::random_latent(rng).values();
    const auto batch = model.decode_batch(zs);
    for (int c = 0; c < 3; ++c) CHECK(batch[static_cast<std::size_t>(c)] == model.decode(music::LatentVector(zs.col(c))));
  }

  TEST_CASE("loss gradients match finite differences") {
    auto model = LeadSheetVae::initialize(3, kTinySheet);
    std::mt19937_64 rng(3);
    const std::vector<music::LeadSheet> batch = {testgen::random_leadsheet(rng), testgen::random_leadsheet(rng)};
    Rng noise_rng(3);
    const MatrixXd noise = nn::standard_normal<double>(32, 2, noise_rng);
    nn::ParameterSet<double> params;
    model.bind(params);
    const auto check = oracle::gradient_check(
        params, [&](nn::Tape& tape) { return model.build_loss(tape, params, batch, noise, 0.2).total; }, 1e-4, 3, kModelGradFloor);
    INFO(check.worst);
    CHECK(check.max_rel_error < 1e-3);
  }

  TEST_CASE("weights round trip") {
    const auto model = LeadSheetVae::initialize(4, kTinySheet);
    const auto w = model.to_weights();
    CHECK(w.kind() == "leadsheet-vae");
    CHECK(LeadSheetVae::from_weights(w).to_weights() == w);
  }

  TEST_CASE("training needs 32 sheets") {
    const auto corpus = music::generate_leadsheet_corpus(31, 1);
    CHECK_THROWS_AS(train_leadsheet_vae(corpus, TrainConfig{}), TrainingError);
  }
}

TEST_SUITE("interpolation") {
  TEST_CASE("endpoints are exact for random cases") {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> steps(2, 17);
    for (int n = 0; n < 200; ++n) {
      const LatentValues a = testgen::random_latent(rng).values();
      const LatentValues b = testgen::random_latent(rng).values();
      const int k = steps(rng);
      for (auto mode : {InterpolationMode::slerp, InterpolationMode::lerp}) {
        CHECK(interpolate_latent(a, b, 0, k, mode) == a);
        CHECK(interpolate_latent(a, b, k - 1, k, mode) == b);
      }
    }
  }

  TEST_CASE("lerp midpoint") {
    std::mt19937_64 rng(11);
    const LatentValues a = testgen::random_latent(rng).values();
    const LatentValues b = testgen::random_latent(rng).values();
    CHECK((interpolate_latent(a, b, 2, 5, InterpolationMode::lerp) - (a + b) / 2).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("slerp stays on the arc between equal-norm endpoints") {
    std::mt19937_64 rng(12);
    LatentValues a = testgen::random_latent(rng).values();
    LatentValues b = testgen::random_latent(rng).values();
    b *= a.norm() / b.norm();
    for (int k = 0; k < 9; ++k) {
      const LatentValues p = interpolate_latent(a, b, k, 9, InterpolationMode::slerp);
      CHECK(p.norm() == doctest::Approx(a.norm()).epsilon(1e-12));
      const double angle_a = std::acos(std::clamp(p.dot(a) / (p.norm() * a.norm()), -1.0, 1.0));
      const double total = std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
      CHECK(angle_a == doctest::Approx(total * k / 8.0).epsilon(1e-9));
    }
  }

  TEST_CASE("slerp falls back to lerp for colinear or zero endpoints") {
    std::mt19937_64 rng(13);
    const LatentValues a = testgen::random_latent(rng).values();
    const LatentValues b = 3.0 * a;
    CHECK(interpolate_latent(a, b, 1, 3, InterpolationMode::slerp) ==
          interpolate_latent(a, b, 1, 3, InterpolationMode::lerp));
    const LatentValues zero = LatentValues::Zero();
    CHECK(interpolate_latent(zero, a, 1, 4, InterpolationMode::slerp) ==
          interpolate_latent(zero, a, 1, 4, InterpolationMode::lerp));
    CHECK(interpolate_latent(a, -a, 1, 3, InterpolationMode::slerp).allFinite());
  }

  TEST_CASE("path reversal symmetry") {
    std::mt19937_64 rng(14);
    for (int n = 0; n < 50; ++n) {
      const LatentValues a = testgen::random_latent(rng).values();
      const LatentValues b = testgen::random_latent(rng).values();
      for (auto mode : {InterpolationMode::slerp, InterpolationMode::lerp}) {
        for (int k = 0; k < 7; ++k) CHECK(interpolate_latent(a, b, k, 7, mode) == interpolate_latent(b, a, 6 - k, 7, mode));
      }
    }
  }

  TEST_CASE("decoded paths") {
    const auto model = LeadSheetVae::initialize(15, kTinySheet);
    const auto other = LeadSheetVae::initialize(16, kTinySheet);
    std::mt19937_64 rng(15);
    const auto a = testgen::random_leadsheet(rng);
    const auto b = testgen::random_leadsheet(rng);
    const auto path = interpolate(model, a, b, 6);
    REQUIRE(path.size() == 6);
    CHECK(path.front() == model.decode(model.encode(a)));
    CHECK(path.back() == model.decode(model.encode(b)));
    const auto same = interpolate(model, a, a, 5);
    for (const auto& frame : same) CHECK(frame == same.front());
    auto reversed = interpolate(model, b, a, 6);
    std::reverse(reversed.begin(), reversed.end());
    CHECK(reversed == path);
    CHECK_THROWS_AS(interpolate(model, a, b, 1), std::invalid_argument);
    CHECK_THROWS_AS(interpolate(model, a, b, 18), std::invalid_argument);

    const auto paired = ab_interpolate(model, model, a, b, 4);
    CHECK(paired.first == paired.second);
    CHECK(paired.alphas == std::vector<double>{0.0, 1.0 / 3, 2.0 / 3, 1.0});
    const auto ab = ab_interpolate(model, other, a, b, 4);
    CHECK(ab.first.size() == 4);
    CHECK(ab.second.size() == 4);
  }
}

TEST_SUITE("harmonizer") {
  TEST_CASE("eight slots for random melodies") {
    const auto model = Harmonizer::initialize(1, kTinyHarmonizer);
    std::mt19937_64 rng(1);
    for (int n = 0; n < 50; ++n) {
      const auto melody = testgen::random_melody(rng);
      const auto out = model.harmonize(melody);
      CHECK(out.chords.chords().size() == 8);
      for (int s = 0; s < 8; ++s) {
        CHECK(out.functions[s].has_value());
        CHECK(std::abs(out.chord_probabilities[s].sum() - 1.0) < 1e-9);
        CHECK(out.chord_probabilities[s].size() == 25);
        CHECK(out.function_probabilities[s].size() == 3);
      }
      const auto again = model.harmonize(melody);
      CHECK(again.chords == out.chords);
      CHECK(again.functions == out.functions);
    }
  }

  TEST_CASE("all-rest melody") {
    const auto model = Harmonizer::initialize(2, kTinyHarmonizer);
    const auto out = model.harmonize(music::MelodyLine{});
    for (int s = 0; s < 8; ++s) {
      CHECK(out.chords[s].is_no_chord());
      CHECK_FALSE(out.functions[s].has_value());
    }
  }

  TEST_CASE("training targets") {
    auto sheet = music::generate_leadsheet_corpus(1, 3).front();
    const auto targets = harmonizer_targets(sheet);
    REQUIRE(targets.has_value());
    for (int s = 0; s < 8; ++s) {
      CHECK(targets->chords[s] == sheet.chords[s].class_index());
      CHECK(targets->functions[s] == static_cast<int>(music::chord_function(sheet.chords[s], 0)));
    }
    auto tokens = sheet.melody.tokens();
    for (int t = 0; t < 8; ++t) tokens[static_cast<std::size_t>(t)] = music::kRestToken;
    tokens[8] = std::max(tokens[8], 2);
    const music::LeadSheet resting{music::MelodyLine::repaired(tokens), sheet.chords, 0};
    const auto rest_targets = harmonizer_targets(resting);
    REQUIRE(rest_targets.has_value());
    CHECK(rest_targets->chords[0] == music::kNoChordClass);
    CHECK(rest_targets->functions[0] == -1);

    auto chords = sheet.chords.chords();
    chords[3] = music::ChordSymbol::major(1);
    CHECK_FALSE(harmonizer_targets({sheet.melody, music::ChordSequence(chords), 0}).has_value());
  }

  TEST_CASE("loss gradients match finite differences") {
    auto model = Harmonizer::initialize(4, kTinyHarmonizer);
    std::mt19937_64 rng(4);
    const std::vector<music::MelodyLine> batch = {testgen::random_melody(rng), testgen::random_melody(rng)};
    std::vector<int> chords;
    std::vector<int> functions;
    for (int i = 0; i < 16; ++i) {
      chords.push_back(static_cast<int>(rng() % 25));
      functions.push_back(i % 5 == 0 ? -1 : static_cast<int>(rng() % 3));
    }
    nn::ParameterSet<double> params;
    model.bind(params);
    const auto check = oracle::gradient_check(
        params, [&](nn::Tape& tape) { return model.build_loss(tape, params, batch, chords, functions, 0.5).total; },
        1e-4, 4, kModelGradFloor);
    INFO(check.worst);
    CHECK(check.max_rel_error < 1e-3);
  }

  TEST_CASE("non-diatonic sheets are excluded") {
    auto corpus = music::generate_leadsheet_corpus(40, 5);
    auto chords = corpus[0].chords.chords();
    chords[0] = music::ChordSymbol::major(6);
    corpus[0].chords = music::ChordSequence(chords);
    TrainConfig config;
    config.epochs = 1;
    const auto result = train_harmonizer(corpus, config, kTinyHarmonizer);
    CHECK(result.excluded == 1);
    corpus.resize(32);
    CHECK_THROWS_AS(train_harmonizer(corpus, config, kTinyHarmonizer), TrainingError);
  }

  TEST_CASE("weights round trip") {
    const auto model = Harmonizer::initialize(6, kTinyHarmonizer);
    const auto w = model.to_weights();
    CHECK(w.kind() == "harmonizer");
    const auto back = Harmonizer::from_weights(w);
    std::mt19937_64 rng(6);
    const auto melody = testgen::random_melody(rng);
    CHECK(back.harmonize(melody).chords == model.harmonize(melody).chords);
  }
}
