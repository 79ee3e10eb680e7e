#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "support.hpp"
#include "vqib/data_synth.hpp"
#include "vqib/model.hpp"
#include "vqib/rng.hpp"

using namespace vqib;
using test::central_diff;
using test::close_rel;
using test::plain_mlp_forward;
using test::plain_mse;

namespace {

std::vector<double> random_vec(int n, SplitMix64& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const Tensor& p : params) out.emplace_back(p.values().begin(), p.values().end());
  return out;
}

MLP identity_mlp(int dim) {
  std::vector<double> w(static_cast<size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) w[static_cast<size_t>(i) * dim + i] = 1.0;
  return MLP::from_layers({Tensor::parameter({dim, dim}, w)},
                          {Tensor::parameter({dim}, std::vector<double>(dim, 0.0))});
}

Dataset reference_mixture() { return gaussian_mixture(7, 8, 2, 1024, 4.0, 0.15); }

TrainConfig reference_config(TrainMode mode) {
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.batch_size = 64;
  cfg.steps = 2000;
  cfg.learning_rate = 0.1;
  cfg.n_codes = 16;
  cfg.code_dim = 2;
  cfg.beta = 0.25;
  cfg.lambda_reg = 0.05;
  cfg.hidden = {16};
  cfg.em_every = 100;
  cfg.mode = mode;
  cfg.regularizer_kind =
      mode == TrainMode::hard_vqvae ? RegularizerKind::none : RegularizerKind::vib_kl;
  return cfg;
}

}  // namespace

TEST_CASE("MLP forward matches a plain-loop reference") {
  SplitMix64 rng(3);
  std::vector<int> widths{3, 5, 2};
  MLP net = MLP::random(widths, rng);
  std::vector<double> x = random_vec(12, rng);

  std::vector<std::vector<double>> weights, biases;
  for (int l = 0; l < net.n_layers(); ++l) {
    weights.emplace_back(net.weight(l).values().begin(), net.weight(l).values().end());
    biases.emplace_back(net.bias(l).values().begin(), net.bias(l).values().end());
  }
  std::vector<double> expected = plain_mlp_forward(widths, weights, biases, x, 4);
  Tensor got = net.forward(Tensor::constant({4, 3}, x));
  REQUIRE(got.size() == static_cast<int>(expected.size()));
  for (size_t i = 0; i < expected.size(); ++i) {
    CHECK(std::abs(got.values()[i] - expected[i]) <= 1e-12);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.mode = TrainMode::soft_em;
  cfg.regularizer_kind = RegularizerKind::none;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.regularizer_kind = RegularizerKind::vib_kl;
  CHECK_NOTHROW(cfg.validate());
  cfg.mode = TrainMode::hard_vqvae;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.regularizer_kind = RegularizerKind::vdib_cross_entropy;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config echo round trip") {
  TrainConfig cfg = reference_config(TrainMode::soft_em);
  cfg.hidden = {16, 8};
  TrainConfig back = train_config_from_echo(train_config_echo(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.steps == cfg.steps);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.n_codes == cfg.n_codes);
  CHECK(back.code_dim == cfg.code_dim);
  CHECK(back.beta == cfg.beta);
  CHECK(back.lambda_reg == cfg.lambda_reg);
  CHECK(back.mode == cfg.mode);
  CHECK(back.regularizer_kind == cfg.regularizer_kind);
  CHECK(back.r_kind == cfg.r_kind);
  CHECK(back.em_every == cfg.em_every);
  CHECK(back.hidden == cfg.hidden);
  CHECK_THROWS_AS(train_config_from_echo("mode=???"), std::invalid_argument);
}

TEST_CASE("hard forward: fixed points and degenerate codebook") {
  SUBCASE("identity nets with z_e on a codeword reconstruct exactly") {
    MLP enc = identity_mlp(2);
    MLP dec = identity_mlp(2);
    Codebook cb(2, 2, {0.5, -1.0, 3.0, 3.0});
    Tensor x = Tensor::constant({1, 2}, {0.5, -1.0});
    HardForward fw = forward_hard(x, enc, cb, dec);
    CHECK(fw.indices[0] == 0);
    CHECK(fw.z_q.values()[0] == 0.5);
    CHECK(fw.z_q.values()[1] == -1.0);
    CHECK(fw.x_hat.values()[0] == 0.5);
    CHECK(fw.x_hat.values()[1] == -1.0);
  }
  SUBCASE("K = 1 always quantizes to the sole codeword") {
    SplitMix64 rng(5);
    MLP enc = MLP::random({2, 3, 2}, rng);
    MLP dec = MLP::random({2, 3, 2}, rng);
    Codebook cb(1, 2, {0.7, 0.7});
    Tensor x = Tensor::constant({3, 2}, random_vec(6, rng));
    HardForward fw = forward_hard(x, enc, cb, dec);
    for (int b = 0; b < 3; ++b) {
      CHECK(fw.indices[b] == 0);
      CHECK(fw.z_q.values()[b * 2] == 0.7);
    }
  }
  SUBCASE("a non-finite stage is reported by name") {
    MLP enc = MLP::from_layers({Tensor::parameter({1, 1}, {1e200})},
                               {Tensor::parameter({1}, {0.0})});
    MLP dec = identity_mlp(1);
    Codebook cb(1, 1, {1e200});
    Tensor x = Tensor::constant({1, 1}, {1e200});
    CHECK_THROWS_WITH_AS(forward_hard(x, enc, cb, dec), doctest::Contains("encoder"),
                         std::runtime_error);
  }
}

TEST_CASE("soft forward: mixture decoder input") {
  SUBCASE("K = 1 feeds the codeword itself") {
    MLP enc = identity_mlp(2);
    MLP dec = identity_mlp(2);
    Codebook cb(1, 2, {0.25, -0.75});
    Tensor x = Tensor::constant({2, 2}, {5.0, 5.0, -5.0, 0.0});
    SoftForward fw = forward_soft(x, enc, cb, dec);
    for (int b = 0; b < 2; ++b) {
      CHECK(fw.assignment.probs[b] == 1.0);
      CHECK(fw.x_hat.values()[b * 2] == 0.25);
      CHECK(fw.x_hat.values()[b * 2 + 1] == -0.75);
    }
  }
  SUBCASE("symmetric codewords put the decoder input at the midpoint") {
    MLP enc = identity_mlp(1);
    MLP dec = identity_mlp(1);
    Codebook cb(2, 1, {-1.0, 1.0});
    SoftForward fw = forward_soft(Tensor::constant({1, 1}, {0.0}), enc, cb, dec);
    CHECK(fw.assignment.probs[0] == 0.5);
    CHECK(fw.x_hat.values()[0] == 0.0);
  }
  SUBCASE("random case matches a manual mixture computation") {
    SplitMix64 rng(11);
    MLP enc = MLP::random({2, 4, 3}, rng);
    MLP dec = MLP::random({3, 4, 2}, rng);
    Codebook cb = Codebook::random(5, 3, rng);
    Tensor x = Tensor::constant({4, 2}, random_vec(8, rng));
    SoftForward fw = forward_soft(x, enc, cb, dec);

    Tensor z_e = enc.forward(x);
    AssignmentBatch a = soft_assignment(z_e, cb);
    std::vector<double> mix(4 * 3, 0.0);
    for (int b = 0; b < 4; ++b) {
      for (int z = 0; z < 5; ++z) {
        for (int c = 0; c < 3; ++c) {
          mix[b * 3 + c] += a.probs[b * 5 + z] * cb.codes().values()[z * 3 + c];
        }
      }
    }
    Tensor expected = dec.forward(Tensor::constant({4, 3}, mix));
    for (int i = 0; i < 8; ++i) {
      CHECK(std::abs(fw.x_hat.values()[i] - expected.values()[i]) <= 1e-12);
    }
  }
}

TEST_CASE("sgd_step") {
  SUBCASE("zero learning rate is the identity") {
    Tensor p = Tensor::parameter({1}, {1.0});
    {
      Tape tape;
      TapeScope scope(tape);
      tape.backward(sum(mul(p, p)));
    }
    std::vector<Tensor> params{p};
    sgd_step(params, 0.0);
    CHECK(p.values()[0] == 1.0);
    CHECK(p.grad()[0] == 0.0);  // grads zeroed regardless
  }
  SUBCASE("single arithmetic step") {
    Tensor p = Tensor::parameter({1}, {1.0});
    {
      Tape tape;
      TapeScope scope(tape);
      tape.backward(sum(mul(p, p)));  // grad 2
    }
    std::vector<Tensor> params{p};
    sgd_step(params, 0.1);
    CHECK(std::abs(p.values()[0] - 0.8) <= 1e-15);
  }
  SUBCASE("converges on a 1-D quadratic") {
    Tensor p = Tensor::parameter({1}, {0.0});
    Tensor target = Tensor::constant({1}, {3.0});
    std::vector<Tensor> params{p};
    for (int step = 0; step < 200; ++step) {
      Tape tape;
      TapeScope scope(tape);
      tape.backward(sum_sqdiff(p, target));
      sgd_step(params, 0.1);
    }
    CHECK(std::abs(p.values()[0] - 3.0) <= 1e-6);
  }
}

TEST_CASE("train: no-op and frozen runs") {
  Dataset data = gaussian_mixture(3, 2, 2, 32, 1.0, 0.2);

  SUBCASE("steps = 0 leaves parameters at their seeded initialization") {
    TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
    cfg.steps = 0;
    cfg.batch_size = 16;
    cfg.n_codes = 4;
    TrainResult r1 = train(cfg, data);
    TrainResult r2 = train(cfg, data);
    CHECK(r1.trace.empty());
    CHECK_FALSE(r1.diverged);
    auto p1 = snapshot(r1.encoder.parameters());
    auto p2 = snapshot(r2.encoder.parameters());
    CHECK(p1 == p2);
    CHECK(snapshot({r1.codebook.codes()}) == snapshot({r2.codebook.codes()}));
  }

  SUBCASE("learning rate 0 with a full-dataset batch keeps the trace constant") {
    TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
    cfg.steps = 5;
    cfg.learning_rate = 0.0;
    cfg.batch_size = 32;  // whole dataset, so every step sees the same batch
    cfg.n_codes = 4;
    TrainResult r = train(cfg, data);
    REQUIRE(r.trace.size() == 5);
    for (const auto& rec : r.trace) {
      CHECK(rec.total == r.trace[0].total);
      CHECK(rec.recon == r.trace[0].recon);
      CHECK(rec.perplexity == r.trace[0].perplexity);
    }
  }
}

TEST_CASE("train: determinism and divergence") {
  Dataset data = gaussian_mixture(5, 4, 2, 128, 2.0, 0.2);

  SUBCASE("identical configs give bit-identical traces") {
    for (TrainMode mode : {TrainMode::hard_vqvae, TrainMode::soft_em}) {
      TrainConfig cfg = reference_config(mode);
      cfg.steps = 60;
      cfg.batch_size = 32;
      cfg.n_codes = 6;
      TrainResult a = train(cfg, data);
      TrainResult b = train(cfg, data);
      REQUIRE(a.trace.size() == b.trace.size());
      for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].total == b.trace[i].total);
        CHECK(a.trace[i].recon == b.trace[i].recon);
        CHECK(a.trace[i].commitment == b.trace[i].commitment);
        CHECK(a.trace[i].codebook == b.trace[i].codebook);
        CHECK(a.trace[i].regularizer == b.trace[i].regularizer);
        CHECK(a.trace[i].perplexity == b.trace[i].perplexity);
        CHECK(a.trace[i].cond_entropy == b.trace[i].cond_entropy);
      }
      CHECK(snapshot({a.codebook.codes()}) == snapshot({b.codebook.codes()}));
    }
  }

  SUBCASE("an absurd learning rate aborts with the last good trace") {
    TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
    cfg.steps = 50;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e9;
    TrainResult r = train(cfg, data);
    CHECK(r.diverged);
    CHECK_FALSE(r.abort_reason.empty());
    CHECK(r.trace.size() < 50);
    for (const auto& rec : r.trace) CHECK(std::isfinite(rec.total));
  }

  SUBCASE("batch_size larger than the dataset is rejected") {
    TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
    cfg.batch_size = 1000;
    CHECK_THROWS_AS(train(cfg, data), std::invalid_argument);
  }
}

TEST_CASE("hard mode: codebook receives gradient only through the codebook loss") {
  SplitMix64 rng(13);
  MLP enc = MLP::random({2, 4, 2}, rng);
  MLP dec = MLP::random({2, 4, 2}, rng);
  Codebook cb = Codebook::random(4, 2, rng);
  Tensor x = Tensor::constant({6, 2}, random_vec(12, rng));

  // Reconstruction-only loss: codebook gradient must be bitwise zero.
  {
    Tape tape;
    TapeScope scope(tape);
    HardForward fw = forward_hard(x, enc, cb, dec);
    Tensor recon = scale(sum_sqdiff(fw.x_hat, x), 1.0 / 12.0);
    tape.backward(recon);
    for (double g : cb.codes().grad()) CHECK(g == 0.0);
  }

  // Full loss: codebook gradient equals the gradient of the codebook loss
  // alone, because no other term can reach it.
  TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
  cfg.n_codes = 4;
  std::vector<double> g_full;
  {
    for (const Tensor& p : enc.parameters()) const_cast<Tensor&>(p).zero_grad();
    cb.codes().zero_grad();
    Tape tape;
    TapeScope scope(tape);
    StepLoss loss = hard_step_loss(x, enc, cb, dec, cfg);
    tape.backward(loss.total);
    g_full.assign(cb.codes().grad().begin(), cb.codes().grad().end());
  }
  {
    cb.codes().zero_grad();
    Tape tape;
    TapeScope scope(tape);
    HardForward fw = forward_hard(x, enc, cb, dec);
    tape.backward(codebook_loss(fw.z_e, cb, fw.indices));
    auto g_cb = cb.codes().grad();
    for (size_t i = 0; i < g_full.size(); ++i) CHECK(g_full[i] == g_cb[i]);
  }
}

TEST_CASE("hard mode training keeps conditional entropy at exactly zero") {
  Dataset data = gaussian_mixture(9, 4, 2, 128, 2.0, 0.2);
  TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
  cfg.steps = 40;
  cfg.batch_size = 32;
  cfg.n_codes = 6;
  TrainResult r = train(cfg, data);
  REQUIRE(r.trace.size() == 40);
  for (const auto& rec : r.trace) CHECK(rec.cond_entropy == 0.0);
}

TEST_CASE("soft mode training keeps conditional entropy strictly positive") {
  Dataset data = gaussian_mixture(9, 4, 2, 128, 2.0, 0.2);
  TrainConfig cfg = reference_config(TrainMode::soft_em);
  cfg.steps = 40;
  cfg.batch_size = 32;
  cfg.n_codes = 6;
  TrainResult r = train(cfg, data);
  REQUIRE(r.trace.size() == 40);
  for (const auto& rec : r.trace) CHECK(rec.cond_entropy > 0.0);
}

// Central differences on the frozen 2-2-2 / K=3 model. The finite-difference
// function treats every stop-gradient argument (and the straight-through
// offset) as a constant captured at the base point, which is precisely what
// the backward pass differentiates.
TEST_CASE("assembled losses match finite differences on the frozen model") {
  SplitMix64 rng(17);
  const int B = 5;
  std::vector<double> x = random_vec(B * 2, rng);

  TrainConfig cfg;
  cfg.n_codes = 3;
  cfg.code_dim = 2;
  cfg.hidden = {2};  // encoder widths 2-2-2
  cfg.beta = 0.25;
  cfg.lambda_reg = 0.4;

  MLP enc = MLP::random({2, 2, 2}, rng);
  MLP dec = MLP::random({2, 2, 2}, rng);
  Codebook cb = Codebook::random(3, 2, rng);
  Tensor xt = Tensor::constant({B, 2}, x);

  // Plain-double copies of every parameter, mutated by the FD loop.
  std::vector<std::vector<double>> enc_w, enc_b, dec_w, dec_b;
  for (int l = 0; l < enc.n_layers(); ++l) {
    enc_w.emplace_back(enc.weight(l).values().begin(), enc.weight(l).values().end());
    enc_b.emplace_back(enc.bias(l).values().begin(), enc.bias(l).values().end());
  }
  for (int l = 0; l < dec.n_layers(); ++l) {
    dec_w.emplace_back(dec.weight(l).values().begin(), dec.weight(l).values().end());
    dec_b.emplace_back(dec.bias(l).values().begin(), dec.bias(l).values().end());
  }
  std::vector<double> codes(cb.codes().values().begin(), cb.codes().values().end());
  std::vector<int> widths{2, 2, 2};

  SUBCASE("hard VQ-VAE loss") {
    cfg.mode = TrainMode::hard_vqvae;
    cfg.regularizer_kind = RegularizerKind::none;

    Tape tape;
    TapeScope scope(tape);
    StepLoss loss = hard_step_loss(xt, enc, cb, dec, cfg);
    tape.backward(loss.total);

    // Frozen straight-through/stop-gradient context at the base point.
    std::vector<double> z_e0(loss.z_e.values().begin(), loss.z_e.values().end());
    std::vector<int> idx0 = loss.indices;
    std::vector<double> z_q0;
    for (int b = 0; b < B; ++b) {
      z_q0.push_back(codes[idx0[b] * 2]);
      z_q0.push_back(codes[idx0[b] * 2 + 1]);
    }
    std::vector<double> st_offset(z_q0.size());
    for (size_t i = 0; i < z_q0.size(); ++i) st_offset[i] = z_q0[i] - z_e0[i];

    auto frozen_total = [&] {
      std::vector<double> z_e = plain_mlp_forward(widths, enc_w, enc_b, x, B);
      std::vector<double> z_q(z_e.size());
      for (size_t i = 0; i < z_e.size(); ++i) z_q[i] = z_e[i] + st_offset[i];
      std::vector<double> x_hat = plain_mlp_forward(widths, dec_w, dec_b, z_q, B);
      double recon = plain_mse(x, x_hat);
      double commit = 0.0, cbl = 0.0;
      for (size_t i = 0; i < z_e.size(); ++i) {
        double dc = z_e[i] - z_q0[i];
        commit += dc * dc;
        double dq = z_e0[i] - codes[idx0[i / 2] * 2 + i % 2];
        cbl += dq * dq;
      }
      return recon + cfg.beta * commit / B + cbl / B;
    };

    CHECK(close_rel(frozen_total(), loss.breakdown.total, 1e-12));

    auto check_param = [&](const Tensor& param, std::vector<double>& buf) {
      auto fd = central_diff(frozen_total, buf, 1e-6);
      auto g = param.grad();
      for (size_t i = 0; i < fd.size(); ++i) CHECK(close_rel(g[i], fd[i], 1e-4));
    };
    check_param(enc.weight(0), enc_w[0]);
    check_param(enc.bias(0), enc_b[0]);
    check_param(enc.weight(1), enc_w[1]);
    check_param(enc.bias(1), enc_b[1]);
    check_param(dec.weight(0), dec_w[0]);
    check_param(dec.bias(0), dec_b[0]);
    check_param(dec.weight(1), dec_w[1]);
    check_param(dec.bias(1), dec_b[1]);
    check_param(cb.codes(), codes);
  }

  SUBCASE("soft VIB loss") {
    cfg.mode = TrainMode::soft_em;
    cfg.regularizer_kind = RegularizerKind::vib_kl;

    Tape tape;
    TapeScope scope(tape);
    StepLoss loss = soft_step_loss(xt, enc, cb, dec, cfg);
    tape.backward(loss.total);

    // Codebook is behind stop_gradient: frozen in the FD function and
    // bitwise-zero in the backward pass.
    for (double g : cb.codes().grad()) CHECK(g == 0.0);

    auto frozen_total = [&] {
      std::vector<double> z_e = plain_mlp_forward(widths, enc_w, enc_b, x, B);
      std::vector<double> probs(static_cast<size_t>(B) * 3);
      for (int b = 0; b < B; ++b) {
        double m = -std::numeric_limits<double>::infinity();
        std::vector<double> neg_d(3);
        for (int z = 0; z < 3; ++z) {
          double d = 0.0;
          for (int c = 0; c < 2; ++c) {
            double diff = z_e[b * 2 + c] - codes[z * 2 + c];
            d += diff * diff;
          }
          neg_d[z] = -d;
          m = std::max(m, neg_d[z]);
        }
        double total = 0.0;
        for (int z = 0; z < 3; ++z) {
          probs[b * 3 + z] = std::exp(neg_d[z] - m);
          total += probs[b * 3 + z];
        }
        for (int z = 0; z < 3; ++z) probs[b * 3 + z] /= total;
      }
      std::vector<double> mix(static_cast<size_t>(B) * 2, 0.0);
      for (int b = 0; b < B; ++b) {
        for (int z = 0; z < 3; ++z) {
          for (int c = 0; c < 2; ++c) {
            mix[b * 2 + c] += probs[b * 3 + z] * codes[z * 2 + c];
          }
        }
      }
      std::vector<double> x_hat = plain_mlp_forward(widths, dec_w, dec_b, mix, B);
      double recon = plain_mse(x, x_hat);
      double kl = 0.0;
      for (int b = 0; b < B; ++b) {
        for (int z = 0; z < 3; ++z) {
          kl += probs[b * 3 + z] * (std::log(probs[b * 3 + z]) - std::log(1.0 / 3.0));
        }
      }
      return recon + cfg.lambda_reg * kl / B;
    };

    CHECK(close_rel(frozen_total(), loss.breakdown.total, 1e-10));

    auto check_param = [&](const Tensor& param, std::vector<double>& buf) {
      auto fd = central_diff(frozen_total, buf, 1e-6);
      auto g = param.grad();
      for (size_t i = 0; i < fd.size(); ++i) CHECK(close_rel(g[i], fd[i], 1e-4));
    };
    check_param(enc.weight(0), enc_w[0]);
    check_param(enc.bias(0), enc_b[0]);
    check_param(enc.weight(1), enc_w[1]);
    check_param(enc.bias(1), enc_b[1]);
    check_param(dec.weight(0), dec_w[0]);
    check_param(dec.bias(0), dec_b[0]);
    check_param(dec.weight(1), dec_w[1]);
    check_param(dec.bias(1), dec_b[1]);
  }
}

TEST_CASE("reference runs: recon improves, entropies behave, perplexity ordering") {
  Dataset data = reference_mixture();
  TrainResult hard = train(reference_config(TrainMode::hard_vqvae), data);
  TrainResult soft = train(reference_config(TrainMode::soft_em), data);

  REQUIRE_FALSE(hard.diverged);
  REQUIRE_FALSE(soft.diverged);
  REQUIRE(hard.trace.size() == 2000);
  REQUIRE(soft.trace.size() == 2000);

  CHECK(hard.trace.back().recon < hard.trace.front().recon);
  CHECK(soft.trace.back().recon < soft.trace.front().recon);
  for (const auto& rec : hard.trace) CHECK(rec.cond_entropy == 0.0);
  for (const auto& rec : soft.trace) CHECK(rec.cond_entropy > 0.0);
  CHECK(soft.trace.back().perplexity >= hard.trace.back().perplexity);
}

TEST_CASE("checkpoint round trip") {
  SplitMix64 rng(23);
  Dataset data = gaussian_mixture(19, 3, 2, 64, 2.0, 0.2);
  TrainConfig cfg = reference_config(TrainMode::hard_vqvae);
  cfg.steps = 10;
  cfg.batch_size = 16;
  cfg.n_codes = 4;
  TrainResult r = train(cfg, data);

  std::stringstream buf;
  save_checkpoint(buf, cfg, r.encoder, r.codebook, r.decoder);
  Checkpoint ck = load_checkpoint(buf);

  CHECK(ck.config.seed == cfg.seed);
  CHECK(ck.config.mode == cfg.mode);
  CHECK(ck.config.n_codes == cfg.n_codes);
  CHECK(snapshot(ck.encoder.parameters()) == snapshot(r.encoder.parameters()));
  CHECK(snapshot(ck.decoder.parameters()) == snapshot(r.decoder.parameters()));
  CHECK(snapshot({ck.codebook.codes()}) == snapshot({r.codebook.codes()}));

  // Same forward outputs after the round trip.
  Tensor x = Tensor::constant({4, 2}, {data.rows.begin(), data.rows.begin() + 8});
  HardForward a = forward_hard(x, r.encoder, r.codebook, r.decoder);
  HardForward b = forward_hard(x, ck.encoder, ck.codebook, ck.decoder);
  for (int i = 0; i < 8; ++i) CHECK(a.x_hat.values()[i] == b.x_hat.values()[i]);

  std::stringstream bad("not-a-checkpoint 1\n");
  CHECK_THROWS_AS(load_checkpoint(bad), std::runtime_error);
}
