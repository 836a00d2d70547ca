#include "musicdemo/nn/training.hpp"
#include "musicdemo/nn/weights.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

using namespace musicdemo::nn;
using Var = Tape::Var;

namespace {

constexpr double kGradTolerance = 1e-3;

std::vector<double> to_std(const MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

void randomize(GruCell<double>& cell, Rng& rng, double scale = 0.8) {
  cell.visit([&](const char*, auto& m) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  });
}

std::vector<int> random_targets(int count, int classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> t(static_cast<std::size_t>(count));
  for (auto& v : t) v = d(rng);
  return t;
}

}  // namespace

TEST_SUITE("dense") {
  TEST_CASE("identity layer") {
    const MatrixXd x = (MatrixXd(3, 1) << 1.5, -2, 0.25).finished();
    const MatrixXd y = dense<double>(MatrixXd::Identity(3, 3), VectorXd::Zero(3), x, Activation::identity);
    CHECK(y == x);
  }

  TEST_CASE("softmax of equal logits") {
    const MatrixXd y = softmax(MatrixXd::Zero(2, 1));
    CHECK(y(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("random 3x4 case matches the loop oracle") {
    Rng rng(11);
    const MatrixXd w = random_matrix(3, 4, rng, 2.0);
    const VectorXd b = random_matrix(3, 1, rng, 2.0);
    const MatrixXd x = random_matrix(4, 1, rng, 2.0);
    for (auto act : {Activation::identity, Activation::sigmoid, Activation::tanh, Activation::softmax}) {
      const auto expected = oracle::dense_scalar(w, b, to_std(x), act);
      const MatrixXd got = dense<double>(w, b, x, act);
      for (int i = 0; i < 3; ++i) CHECK(std::abs(got(i, 0) - expected[static_cast<std::size_t>(i)]) <= 1e-12);
    }
  }

  TEST_CASE("softmax is normalized and positive") {
    Rng rng(5);
    for (int n = 0; n < 200; ++n) {
      const MatrixXd logits = random_matrix(25, 7, rng, 40.0);
      const MatrixXd p = softmax(logits);
      for (Eigen::Index c = 0; c < p.cols(); ++c) CHECK(std::abs(p.col(c).sum() - 1.0) < 1e-9);
      CHECK((p.array() > 0).all());
    }
  }

  TEST_CASE("shape mismatch") {
    CHECK_THROWS_AS(dense<double>(MatrixXd::Zero(3, 4), VectorXd::Zero(3), MatrixXd::Zero(5, 1), Activation::tanh),
                    DimensionError);
  }
}

TEST_SUITE("gru") {
  TEST_CASE("zero cell stays at zero") {
    GruCell<double> cell;
    Rng rng(1);
    cell = make_gru_cell<double>(3, 4, rng);
    cell.visit([](const char*, auto& m) { m.setZero(); });
    CHECK(gru_step(cell, random_matrix(3, 1, rng), MatrixXd::Zero(4, 1)).isZero(0));
  }

  TEST_CASE("closed update gate keeps the state") {
    Rng rng(2);
    auto cell = make_gru_cell<double>(3, 4, rng);
    cell.b_z.setConstant(-1000);
    const MatrixXd h = random_matrix(4, 1, rng);
    CHECK(gru_step(cell, random_matrix(3, 1, rng, 5.0), h) == h);
  }

  TEST_CASE("I=H=2 random case matches the scalar oracle") {
    Rng rng(3);
    auto cell = make_gru_cell<double>(2, 2, rng);
    randomize(cell, rng, 1.5);
    for (int n = 0; n < 50; ++n) {
      const MatrixXd x = random_matrix(2, 1, rng, 2.0);
      const MatrixXd h = random_matrix(2, 1, rng, 1.0);
      const auto expected = oracle::gru_step_scalar(cell, to_std(x), to_std(h));
      const MatrixXd got = gru_step(cell, x, h);
      for (int i = 0; i < 2; ++i) CHECK(std::abs(got(i, 0) - expected[static_cast<std::size_t>(i)]) <= 1e-12);
    }
  }

  TEST_CASE("batched columns are independent") {
    Rng rng(4);
    auto cell = make_gru_cell<double>(3, 5, rng);
    const MatrixXd x = random_matrix(3, 6, rng);
    const MatrixXd h = random_matrix(5, 6, rng);
    const MatrixXd all = gru_step(cell, x, h);
    for (int c = 0; c < 6; ++c) {
      const MatrixXd one = gru_step(cell, x.col(c), h.col(c));
      CHECK((all.col(c) - one).cwiseAbs().maxCoeff() <= 1e-14);
    }
  }

  TEST_CASE("dimension mismatch") {
    Rng rng(5);
    auto cell = make_gru_cell<double>(3, 4, rng);
    CHECK_THROWS_AS(gru_step(cell, MatrixXd::Zero(2, 1), MatrixXd::Zero(4, 1)), DimensionError);
    CHECK_THROWS_AS(gru_step(cell, MatrixXd::Zero(3, 1), MatrixXd::Zero(3, 1)), DimensionError);
  }
}

TEST_SUITE("bgru") {
  TEST_CASE("single frame") {
    Rng rng(6);
    auto f = make_gru_cell<double>(3, 4, rng);
    auto b = make_gru_cell<double>(3, 4, rng);
    const std::vector<MatrixXd> xs = {random_matrix(3, 1, rng)};
    const MatrixXd out = bgru_encode<double>(f, b, xs);
    MatrixXd expected(8, 1);
    expected << gru_step(f, xs[0], MatrixXd::Zero(4, 1)), gru_step(b, xs[0], MatrixXd::Zero(4, 1));
    CHECK(out == expected);
  }

  TEST_CASE("palindrome with shared cell") {
    Rng rng(7);
    auto cell = make_gru_cell<double>(3, 4, rng);
    std::vector<MatrixXd> xs;
    for (int t = 0; t < 3; ++t) xs.push_back(random_matrix(3, 1, rng));
    xs.push_back(xs[1]);
    xs.push_back(xs[0]);
    const MatrixXd out = bgru_encode<double>(cell, cell, xs);
    CHECK(out.topRows(4) == out.bottomRows(4));
  }

  TEST_CASE("random T=5 case matches the two-loop oracle") {
    Rng rng(8);
    auto f = make_gru_cell<double>(3, 4, rng);
    auto b = make_gru_cell<double>(3, 4, rng);
    randomize(f, rng);
    randomize(b, rng);
    std::vector<MatrixXd> xs;
    std::vector<std::vector<double>> raw;
    for (int t = 0; t < 5; ++t) {
      xs.push_back(random_matrix(3, 1, rng, 2.0));
      raw.push_back(to_std(xs.back()));
    }
    const auto expected = oracle::bgru_scalar(f, b, raw);
    const MatrixXd out = bgru_encode<double>(f, b, xs);
    for (int i = 0; i < 8; ++i) CHECK(std::abs(out(i, 0) - expected[static_cast<std::size_t>(i)]) <= 1e-12);
  }

  TEST_CASE("empty sequence") {
    Rng rng(9);
    auto f = make_gru_cell<double>(3, 4, rng);
    CHECK_THROWS_AS(bgru_encode<double>(f, f, std::span<const MatrixXd>{}), DimensionError);
  }
}

TEST_SUITE("gaussian") {
  TEST_CASE("KL closed form examples") {
    CHECK(kl_divergence(VectorXd::Zero(4), VectorXd::Zero(4)) == 0.0);
    CHECK(kl_divergence(VectorXd::Ones(1), VectorXd::Zero(1)) == doctest::Approx(0.5));
    const VectorXd lv = VectorXd::Constant(1, std::log(4.0));
    CHECK(kl_divergence(VectorXd::Zero(1), lv) == doctest::Approx(0.5 * (4 - std::log(4.0) - 1)).epsilon(1e-14));
  }

  TEST_CASE("KL matches numerical integration") {
    const VectorXd lv = VectorXd::Constant(1, std::log(4.0));
    CHECK(std::abs(kl_divergence(VectorXd::Zero(1), lv) - oracle::kl_by_quadrature(VectorXd::Zero(1), lv)) < 1e-6);
    Rng rng(10);
    const VectorXd m = random_matrix(6, 1, rng, 2.0);
    const VectorXd l = random_matrix(6, 1, rng, 2.0);
    CHECK(std::abs(kl_divergence(m, l) - oracle::kl_by_quadrature(m, l)) < 1e-6);
  }

  TEST_CASE("KL is non-negative") {
    Rng rng(11);
    for (int n = 0; n < 1000; ++n) {
      CHECK(kl_divergence(random_matrix(32, 1, rng, 5.0), random_matrix(32, 1, rng, 8.0)) >= 0.0);
    }
  }

  TEST_CASE("degenerate variance returns the mean") {
    Rng rng(12);
    const VectorXd m = random_matrix(32, 1, rng, 3.0);
    const VectorXd z = sample_gaussian(m, VectorXd::Constant(32, -60.0), rng);
    CHECK((z - m).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("standard draw equals the recorded noise for seed 42") {
    // std::normal_distribution<double> over std::mt19937_64(42), libstdc++.
    const double recorded[] = {0.70498826642085988, 1.2938204232729367, -0.5740948067202617, 0.39797739618378897};
    Rng rng(42);
    const VectorXd z = sample_gaussian(VectorXd::Zero(4), VectorXd::Zero(4), rng);
    for (int i = 0; i < 4; ++i) CHECK(z(i) == recorded[i]);
  }

  TEST_CASE("law of large numbers") {
    Rng rng(13);
    const MatrixXd z = sample_gaussian(MatrixXd::Zero(1, 10000), MatrixXd::Zero(1, 10000), rng);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().sum() / (z.size() - 1);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
  }

  TEST_CASE("seeded determinism") {
    Rng a(99);
    Rng b(99);
    CHECK(sample_gaussian(MatrixXd::Zero(5, 3), MatrixXd::Ones(5, 3), a) ==
          sample_gaussian(MatrixXd::Zero(5, 3), MatrixXd::Ones(5, 3), b));
  }
}

TEST_SUITE("gradients") {
  TEST_CASE("dense with each activation") {
    for (auto act : {Activation::identity, Activation::sigmoid, Activation::tanh}) {
      Rng rng(20);
      auto layer = make_dense<double>(4, 3, rng);
      layer.bias = random_matrix(3, 1, rng);
      MatrixXd x = random_matrix(4, 5, rng);
      const auto targets = random_targets(5, 3, rng);
      ParameterSet<double> params;
      params.add("layer", layer);
      params.add("x", x);
      const auto check = oracle::gradient_check(params, [&](Tape& tape) {
        const Var y = tape.activate(tape.affine(tape.parameters(layer, params), tape.parameter(params.at("x"))), act);
        return tape.softmax_cross_entropy(y, targets, 5.0);
      });
      INFO(check.worst);
      CHECK(check.max_rel_error < kGradTolerance);
    }
  }

  TEST_CASE("gru step") {
    Rng rng(21);
    auto cell = make_gru_cell<double>(2, 2, rng);
    randomize(cell, rng);
    auto head = make_dense<double>(2, 3, rng);
    MatrixXd x = random_matrix(2, 4, rng);
    MatrixXd h = random_matrix(2, 4, rng);
    const auto targets = random_targets(4, 3, rng);
    ParameterSet<double> params;
    params.add("gru", cell);
    params.add("head", head);
    params.add("x", x);
    params.add("h", h);
    const auto check = oracle::gradient_check(params, [&](Tape& tape) {
      const Var out = tape.gru_step(tape.parameters(cell, params), tape.parameter(params.at("x")),
                                    tape.parameter(params.at("h")));
      return tape.softmax_cross_entropy(tape.affine(tape.parameters(head, params), out), targets, 4.0);
    });
    INFO(check.worst);
    CHECK(check.max_rel_error < kGradTolerance);
  }

  TEST_CASE("bgru encode") {
    Rng rng(22);
    auto f = make_gru_cell<double>(3, 4, rng);
    auto b = make_gru_cell<double>(3, 4, rng);
    randomize(f, rng);
    randomize(b, rng);
    MatrixXd seq = random_matrix(3, 5 * 2, rng);  // T=5 frames, batch 2
    MatrixXd targets = (random_matrix(8, 2, rng).array() > 0).cast<double>();
    ParameterSet<double> params;
    params.add("f", f);
    params.add("b", b);
    params.add("seq", seq);
    const auto check = oracle::gradient_check(params, [&](Tape& tape) {
      const auto fv = tape.parameters(f, params);
      const auto bv = tape.parameters(b, params);
      const Var all = tape.parameter(params.at("seq"));
      std::vector<Var> frames;
      for (int t = 0; t < 5; ++t) {
        // slice frame t through a fixed selection matrix so the input gradient is checked too
        MatrixXd select = MatrixXd::Zero(10, 2);
        select(2 * t, 0) = 1;
        select(2 * t + 1, 1) = 1;
        frames.push_back(tape.affine(all, tape.constant(select), tape.constant(MatrixXd::Zero(3, 1))));
      }
      Var hf = tape.constant(MatrixXd::Zero(4, 2));
      for (int t = 0; t < 5; ++t) hf = tape.gru_step(fv, frames[static_cast<std::size_t>(t)], hf);
      Var hb = tape.constant(MatrixXd::Zero(4, 2));
      for (int t = 4; t >= 0; --t) hb = tape.gru_step(bv, frames[static_cast<std::size_t>(t)], hb);
      return tape.sigmoid_cross_entropy(tape.concat_rows({hf, hb}), targets, 2.0);
    });
    INFO(check.worst);
    CHECK(check.max_rel_error < kGradTolerance);
  }

  TEST_CASE("softmax cross-entropy with ignored columns") {
    Rng rng(23);
    MatrixXd logits = random_matrix(25, 6, rng, 3.0);
    std::vector<int> targets = random_targets(6, 25, rng);
    targets[2] = -1;
    ParameterSet<double> params;
    params.add("logits", logits);
    const auto check = oracle::gradient_check(params, [&](Tape& tape) {
      return tape.softmax_cross_entropy(tape.parameter(params.at("logits")), targets, 6.0);
    });
    INFO(check.worst);
    CHECK(check.max_rel_error < kGradTolerance);
  }

  TEST_CASE("kl divergence and reparameterization") {
    Rng rng(24);
    MatrixXd mean = random_matrix(4, 3, rng, 2.0);
    MatrixXd logvar = random_matrix(4, 3, rng, 2.0);
    const MatrixXd eps = standard_normal<double>(4, 3, rng);
    const MatrixXd targets = (random_matrix(4, 3, rng).array() > 0).cast<double>();
    ParameterSet<double> params;
    params.add("mean", mean);
    params.add("logvar", logvar);
    const auto kl = oracle::gradient_check(params, [&](Tape& tape) {
      return tape.kl_standard_normal(tape.parameter(params.at("mean")), tape.parameter(params.at("logvar")), 3.0);
    });
    INFO(kl.worst);
    CHECK(kl.max_rel_error < kGradTolerance);
    const auto rep = oracle::gradient_check(params, [&](Tape& tape) {
      const Var z = tape.reparameterize(tape.parameter(params.at("mean")), tape.parameter(params.at("logvar")), eps);
      return tape.sigmoid_cross_entropy(z, targets, 1.0);
    });
    INFO(rep.worst);
    CHECK(rep.max_rel_error < kGradTolerance);
  }

  TEST_CASE("composite ops: mean, weighted sum, mul, add, scale") {
    Rng rng(25);
    MatrixXd a = random_matrix(3, 2, rng);
    MatrixXd b = random_matrix(3, 2, rng);
    const MatrixXd targets = (random_matrix(3, 2, rng).array() > 0).cast<double>();
    ParameterSet<double> params;
    params.add("a", a);
    params.add("b", b);
    const auto check = oracle::gradient_check(params, [&](Tape& tape) {
      const Var va = tape.parameter(params.at("a"));
      const Var vb = tape.parameter(params.at("b"));
      const Var parts[] = {tape.mul(va, vb), tape.tanh(va), tape.sigmoid(tape.add(va, tape.scale(vb, -2.0)))};
      const Var m = tape.mean(parts);
      const Var l1 = tape.sigmoid_cross_entropy(m, targets, 1.0);
      const Var l2 = tape.kl_standard_normal(va, vb, 1.0);
      const std::pair<Var, double> terms[] = {{l1, 1.0}, {l2, 0.3}};
      return tape.weighted_sum(terms);
    });
    INFO(check.worst);
    CHECK(check.max_rel_error < kGradTolerance);
  }

  TEST_CASE("a parameter used twice accumulates both paths") {
    Rng rng(26);
    MatrixXd w = random_matrix(2, 2, rng);
    ParameterSet<double> params;
    params.add("w", w);
    const std::vector<int> targets = {0, 1};
    const auto check = oracle::gradient_check(params, [&](Tape& tape) {
      const Var v = tape.parameter(params.at("w"));
      const Var again = tape.parameter(params.at("w"));
      return tape.softmax_cross_entropy(tape.mul(v, again), targets, 1.0);
    });
    CHECK(check.max_rel_error < kGradTolerance);
  }
}

TEST_SUITE("training") {
  TEST_CASE("zero learning rate leaves weights unchanged") {
    Rng rng(30);
    auto layer = make_dense<double>(3, 4, rng);
    const auto before = layer.weight;
    ParameterSet<double> params;
    params.add("layer", layer);
    Adam<double> adam;
    const MatrixXd x = random_matrix(3, 2, rng);
    const std::vector<int> targets = {1, 3};
    for (int i = 0; i < 5; ++i) {
      train_step(params, adam, 0.0, [&](Tape& tape) {
        const Var loss = tape.softmax_cross_entropy(tape.affine(tape.parameters(layer, params), tape.constant(x)),
                                                    targets, 2.0);
        return LossGraph<double>{loss, {{"ce", loss}}};
      });
    }
    CHECK(layer.weight == before);
  }

  TEST_CASE("overfits a single example") {
    Rng rng(31);
    auto cell = make_gru_cell<double>(4, 8, rng);
    auto head = make_dense<double>(8, 4, rng);
    ParameterSet<double> params;
    params.add("gru", cell);
    params.add("head", head);
    Adam<double> adam;
    const std::vector<int> sequence = {0, 2, 1, 3, 3, 0};
    auto build = [&](Tape& tape) {
      const auto g = tape.parameters(cell, params);
      const auto o = tape.parameters(head, params);
      Var h = tape.constant(MatrixXd::Zero(8, 1));
      std::vector<Var> losses;
      for (std::size_t t = 0; t + 1 < sequence.size(); ++t) {
        MatrixXd x = MatrixXd::Zero(4, 1);
        x(sequence[t], 0) = 1;
        h = tape.gru_step(g, tape.constant(x), h);
        const int next[] = {sequence[t + 1]};
        losses.push_back(tape.softmax_cross_entropy(tape.affine(o, h), next, 1.0));
      }
      const Var total = tape.sum(losses);
      return LossGraph<double>{total, {{"reconstruction", total}}};
    };
    const double first = train_step(params, adam, 1e-2, build).term("reconstruction");
    double last = first;
    for (int i = 1; i < 200; ++i) last = train_step(params, adam, 1e-2, build).term("reconstruction");
    CHECK(last < first);
    CHECK(last < 0.1 * first);
  }

  TEST_CASE("non-finite loss names the term and keeps weights") {
    Rng rng(32);
    auto layer = make_dense<double>(2, 2, rng);
    const auto before = layer.weight;
    ParameterSet<double> params;
    params.add("layer", layer);
    Adam<double> adam;
    MatrixXd x = MatrixXd::Constant(2, 1, std::numeric_limits<double>::quiet_NaN());
    try {
      train_step(params, adam, 1e-3, [&](Tape& tape) {
        const int t[] = {0};
        const Var loss = tape.softmax_cross_entropy(tape.affine(tape.parameters(layer, params), tape.constant(x)),
                                                    t, 1.0);
        return LossGraph<double>{loss, {{"melody", loss}}};
      });
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(e.tensor() == "melody");
    }
    CHECK(layer.weight == before);
  }

  TEST_CASE("gradient clipping bounds the applied update norm") {
    Rng rng(33);
    MatrixXd w = MatrixXd::Zero(3, 1);
    ParameterSet<double> params;
    auto& p = params.add("w", w);
    p.grad = MatrixXd::Constant(3, 1, 100.0);
    Adam<double> adam;
    adam.step(params, 0.0);
    // first moment is (1 - beta1) * clipped gradient; clipped norm is 5
    CHECK(p.first_moment.norm() == doctest::Approx(0.1 * 5.0));
  }

  TEST_CASE("kl warm-up") {
    CHECK(kl_weight(0.2, 0, 100) == 0.0);
    CHECK(kl_weight(0.2, 10, 100) == doctest::Approx(0.1));
    CHECK(kl_weight(0.2, 20, 100) == doctest::Approx(0.2));
    CHECK(kl_weight(0.2, 90, 100) == doctest::Approx(0.2));
  }

  TEST_CASE("minibatches cover every index once") {
    Rng rng(34);
    const auto batches = minibatches(37, 16, rng);
    CHECK(batches.size() == 3);
    std::vector<int> seen;
    for (const auto& b : batches) seen.insert(seen.end(), b.begin(), b.end());
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 37; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
  }

  TEST_CASE("glorot bounds") {
    Rng rng(35);
    const MatrixXd w = glorot_uniform<double>(30, 50, rng);
    const double limit = std::sqrt(6.0 / 80.0);
    CHECK(w.cwiseAbs().maxCoeff() <= limit);
    CHECK(w.cwiseAbs().maxCoeff() > 0.9 * limit);
    auto layer = make_dense<double>(5, 3, rng);
    CHECK(layer.bias.isZero(0));
  }
}

TEST_SUITE("weights file") {
  ModelWeights sample_weights() {
    ModelWeights w;
    w.metadata = {{"kind", "test"}, {"latent_dim", 32}};
    Tensor t;
    t.shape = {2, 3};
    t.data = {1.0, -0.0, 3.5, std::numeric_limits<double>::min(), 1e300, -7.25};
    w.add("layer.weight", t);
    return w;
  }

  WeightsError::Kind error_kind(const std::function<void()>& f) {
    try {
      f();
    } catch (const WeightsError& e) {
      return e.kind();
    }
    FAIL("expected WeightsError");
    return WeightsError::Kind::io;
  }

  TEST_CASE("round trip is bit exact") {
    const auto w = sample_weights();
    const auto bytes = encode_weights(w);
    const auto back = decode_weights(bytes);
    CHECK(back == w);
    CHECK(std::signbit(back.tensors[0].second.data[1]));
    const auto path = std::filesystem::temp_directory_path() / "musicdemo_weights_test.weights";
    save_weights(w, path);
    CHECK(load_weights(path) == w);
    std::filesystem::remove(path);
  }

  TEST_CASE("container layout") {
    const auto bytes = encode_weights(sample_weights());
    std::uint64_t header_len = 0;
    for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
    const auto header = nlohmann::json::parse(bytes.substr(8, header_len));
    CHECK(header.at("format_version") == 1);
    CHECK(header.at("tensors")[0].at("name") == "layer.weight");
    CHECK(header.at("tensors")[0].at("shape") == nlohmann::json::array({2, 3}));
    CHECK(bytes.size() == 8 + header_len + 6 * 8);
    double third = 0;
    std::memcpy(&third, bytes.data() + 8 + header_len + 2 * 8, 8);
    CHECK(third == 3.5);
  }

  TEST_CASE("version mismatch") {
    auto w = sample_weights();
    w.format_version = 2;
    const auto bytes = encode_weights(w);
    CHECK(error_kind([&] { decode_weights(bytes); }) == WeightsError::Kind::version_mismatch);
  }

  TEST_CASE("truncation is a parse error") {
    const auto bytes = encode_weights(sample_weights());
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() - 1}) {
      CHECK(error_kind([&] { decode_weights(bytes.substr(0, cut)); }) == WeightsError::Kind::parse);
    }
    CHECK(error_kind([&] { decode_weights(bytes + "x"); }) == WeightsError::Kind::parse);
  }

  TEST_CASE("missing and mismatched tensors") {
    const auto w = sample_weights();
    MatrixXd out(2, 3);
    w.assign_to("layer.weight", out);
    CHECK(out(1, 2) == -7.25);
    CHECK(out(0, 2) == 3.5);
    CHECK(error_kind([&] { w.assign_to("layer.bias", out); }) == WeightsError::Kind::missing_tensor);
    MatrixXd wrong(3, 2);
    CHECK(error_kind([&] { w.assign_to("layer.weight", wrong); }) == WeightsError::Kind::shape_mismatch);
  }

  TEST_CASE("invalid additions") {
    auto w = sample_weights();
    CHECK(error_kind([&] { w.add("layer.weight", w.tensors[0].second); }) == WeightsError::Kind::duplicate_tensor);
    Tensor bad;
    bad.shape = {2, 2};
    bad.data = {1, 2, 3};
    CHECK(error_kind([&] { w.add("bad", bad); }) == WeightsError::Kind::invalid_tensor);
    Tensor nan;
    nan.shape = {1, 1};
    nan.data = {std::numeric_limits<double>::quiet_NaN()};
    CHECK(error_kind([&] { w.add("nan", nan); }) == WeightsError::Kind::invalid_tensor);
  }

  TEST_CASE("missing file") {
    CHECK(error_kind([] { load_weights("/nonexistent/dir/x.weights"); }) == WeightsError::Kind::io);
  }
}
