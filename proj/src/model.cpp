#include "vqib/model.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vqib {

namespace {

template <typename F>
auto run_stage(const char* stage, F&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(stage) + ": " + e.what());
  }
}

void write_matrix(std::ostream& out, int rows, int cols, std::span<const double> data) {
  out << rows << ' ' << cols << '\n';
  char buf[32];
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data[static_cast<size_t>(i) * cols + j]);
      out << buf << (j + 1 == cols ? '\n' : ' ');
    }
  }
}

std::vector<double> read_matrix(std::istream& in, int& rows, int& cols) {
  if (!(in >> rows >> cols) || rows < 1 || cols < 1) {
    throw std::runtime_error("checkpoint: bad matrix header");
  }
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  for (auto& v : data) {
    if (!(in >> v)) throw std::runtime_error("checkpoint: truncated matrix");
  }
  return data;
}

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw std::runtime_error("checkpoint: expected '" + want + "'");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// MLP

MLP MLP::random(const std::vector<int>& widths, SplitMix64& rng) {
  if (widths.size() < 2) throw std::invalid_argument("MLP needs at least two widths");
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("MLP widths must be positive");
  }
  MLP net;
  net.widths_ = widths;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    int fan_in = widths[l], fan_out = widths[l + 1];
    double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(static_cast<size_t>(fan_in) * fan_out);
    for (double& v : w) v = s * rng.uniform(-0.5, 0.5);
    net.weights_.push_back(Tensor::parameter({fan_in, fan_out}, std::move(w)));
    net.biases_.push_back(Tensor::parameter({fan_out}, std::vector<double>(fan_out, 0.0)));
  }
  return net;
}

MLP MLP::from_layers(std::vector<Tensor> weights, std::vector<Tensor> biases) {
  if (weights.empty() || weights.size() != biases.size()) {
    throw std::invalid_argument("MLP layer lists are empty or mismatched");
  }
  MLP net;
  net.widths_.push_back(weights[0].rows());
  for (size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != net.widths_.back()) {
      throw std::invalid_argument("MLP layer widths are inconsistent");
    }
    if (biases[l].size() != weights[l].cols()) {
      throw std::invalid_argument("MLP bias length does not match layer output");
    }
    net.widths_.push_back(weights[l].cols());
  }
  net.weights_ = std::move(weights);
  net.biases_ = std::move(biases);
  return net;
}

Tensor MLP::forward(const Tensor& x) const {
  if (weights_.empty()) throw std::logic_error("MLP::forward on an empty net");
  if (!x.defined() || x.shape().size() != 2 || x.cols() != widths_.front()) {
    throw std::invalid_argument("MLP::forward: input shape mismatch");
  }
  Tensor h = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    h = add_rowvec(matmul(h, weights_[l]), biases_[l]);
    if (l + 1 < weights_.size()) h = relu(h);
  }
  return h;
}

std::vector<Tensor> MLP::parameters() const {
  std::vector<Tensor> out;
  for (size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

std::string to_string(TrainMode mode) {
  return mode == TrainMode::hard_vqvae ? "hard_vqvae" : "soft_em";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "hard_vqvae") return TrainMode::hard_vqvae;
  if (s == "soft_em") return TrainMode::soft_em;
  throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(MarginalKind kind) {
  return kind == MarginalKind::uniform ? "uniform" : "fitted";
}

MarginalKind marginal_kind_from_string(const std::string& s) {
  if (s == "uniform") return MarginalKind::uniform;
  if (s == "fitted") return MarginalKind::fitted;
  throw std::invalid_argument("unknown r_kind: " + s);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
  if (n_codes < 1) throw std::invalid_argument("K must be >= 1");
  if (code_dim < 1) throw std::invalid_argument("code_dim must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta must be finite and >= 0");
  }
  if (!(lambda_reg >= 0.0) || !std::isfinite(lambda_reg)) {
    throw std::invalid_argument("lambda_reg must be finite and >= 0");
  }
  if (em_every < 1) throw std::invalid_argument("em_every must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden widths must be positive");
  }
  if (mode == TrainMode::hard_vqvae) {
    if (regularizer_kind == RegularizerKind::vib_kl) {
      throw std::invalid_argument("hard_vqvae pairs with regularizer_kind none or vdib_cross_entropy");
    }
  } else {
    if (regularizer_kind != RegularizerKind::vib_kl) {
      throw std::invalid_argument("soft_em pairs with regularizer_kind vib_kl");
    }
  }
}

std::string train_config_echo(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "mode=" << to_string(cfg.mode);
  out << " regularizer_kind=" << to_string(cfg.regularizer_kind);
  out << " r_kind=" << to_string(cfg.r_kind);
  out << " seed=" << cfg.seed;
  out << " steps=" << cfg.steps;
  out << " batch_size=" << cfg.batch_size;
  out << " learning_rate=" << format_double(cfg.learning_rate);
  out << " K=" << cfg.n_codes;
  out << " code_dim=" << cfg.code_dim;
  out << " hidden=";
  for (size_t i = 0; i < cfg.hidden.size(); ++i) out << (i ? "," : "") << cfg.hidden[i];
  out << " beta=" << format_double(cfg.beta);
  out << " lambda_reg=" << format_double(cfg.lambda_reg);
  out << " em_every=" << cfg.em_every;
  return out.str();
}

TrainConfig train_config_from_echo(const std::string& line) {
  TrainConfig cfg;
  std::istringstream in(line);
  std::string token;
  while (in >> token) {
    size_t eq = token.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config echo: expected key=value, got '" + token + "'");
    }
    std::string key = token.substr(0, eq);
    std::string value = token.substr(eq + 1);
    if (key == "mode") {
      cfg.mode = train_mode_from_string(value);
    } else if (key == "regularizer_kind") {
      cfg.regularizer_kind = regularizer_kind_from_string(value);
    } else if (key == "r_kind") {
      cfg.r_kind = marginal_kind_from_string(value);
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "steps") {
      cfg.steps = std::stoi(value);
    } else if (key == "batch_size") {
      cfg.batch_size = std::stoi(value);
    } else if (key == "learning_rate") {
      cfg.learning_rate = std::stod(value);
    } else if (key == "K") {
      cfg.n_codes = std::stoi(value);
    } else if (key == "code_dim") {
      cfg.code_dim = std::stoi(value);
    } else if (key == "hidden") {
      cfg.hidden.clear();
      std::istringstream hs(value);
      std::string piece;
      while (std::getline(hs, piece, ',')) cfg.hidden.push_back(std::stoi(piece));
    } else if (key == "beta") {
      cfg.beta = std::stod(value);
    } else if (key == "lambda_reg") {
      cfg.lambda_reg = std::stod(value);
    } else if (key == "em_every") {
      cfg.em_every = std::stoi(value);
    } else {
      throw std::invalid_argument("config echo: unknown key '" + key + "'");
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Forward passes and loss graphs

HardForward forward_hard(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec) {
  HardForward out;
  out.z_e = run_stage("encoder", [&] { return enc.forward(x); });
  QuantizeResult q =
      run_stage("quantizer", [&] { return straight_through_quantize(out.z_e, cb); });
  out.z_q = q.z_q;
  out.indices = std::move(q.indices);
  out.x_hat = run_stage("decoder", [&] { return dec.forward(out.z_q); });
  return out;
}

SoftForward forward_soft(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec) {
  SoftForward out;
  out.z_e = run_stage("encoder", [&] { return enc.forward(x); });
  Tensor z_mix = run_stage("quantizer", [&] {
    // The codebook is frozen inside the gradient path: EM owns its updates.
    Tensor codes = stop_gradient(cb.codes());
    Tensor d2 = pairwise_sqdist(out.z_e, codes);
    out.probs = softmax_rows(scale(d2, -1.0));
    return matmul(out.probs, codes);
  });
  out.x_hat = run_stage("decoder", [&] { return dec.forward(z_mix); });
  auto pv = out.probs.values();
  out.assignment = AssignmentBatch::soft(out.probs.rows(), out.probs.cols(),
                                         std::vector<double>(pv.begin(), pv.end()));
  return out;
}

StepLoss hard_step_loss(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec,
                        const TrainConfig& cfg) {
  HardForward fw = forward_hard(x, enc, cb, dec);
  const int batch = x.rows(), data_dim = x.cols();

  StepLoss out;
  out.z_e = fw.z_e;
  out.x_hat = fw.x_hat;
  out.indices = fw.indices;
  out.assignment = AssignmentBatch::hard(fw.indices, cb.n_codes());

  Tensor recon = scale(sum_sqdiff(fw.x_hat, x), 1.0 / (static_cast<double>(batch) * data_dim));
  Tensor commit = commitment_loss(fw.z_e, fw.z_q);
  Tensor cb_loss = codebook_loss(fw.z_e, cb, fw.indices);

  LossParts parts;
  parts.reconstruction = recon.item();
  parts.commitment = commit.item();
  parts.codebook = cb_loss.item();

  Tensor total = add(add(recon, scale(commit, cfg.beta)), cb_loss);
  if (cfg.regularizer_kind == RegularizerKind::vdib_cross_entropy) {
    Marginal r = cfg.r_kind == MarginalKind::fitted ? fitted_marginal(out.assignment)
                                                    : Marginal::uniform(cb.n_codes());
    double reg = vdib_regularizer(out.assignment, r);
    parts.regularizer = reg;
    // One-hot rows never probe a zero of a uniform or fitted marginal, so
    // reg is finite here; the constant enters the total without a gradient.
    total = add(total, Tensor::scalar(cfg.lambda_reg * reg));
  }
  out.total = total;
  out.breakdown = assemble(cfg.regularizer_kind, parts, cfg.beta, cfg.lambda_reg);
  return out;
}

StepLoss soft_step_loss(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec,
                        const TrainConfig& cfg) {
  SoftForward fw = forward_soft(x, enc, cb, dec);
  const int batch = x.rows(), data_dim = x.cols();
  const int k = cb.n_codes();

  StepLoss out;
  out.z_e = fw.z_e;
  out.x_hat = fw.x_hat;
  out.assignment = fw.assignment;

  Tensor recon = scale(sum_sqdiff(fw.x_hat, x), 1.0 / (static_cast<double>(batch) * data_dim));

  Marginal r = cfg.r_kind == MarginalKind::fitted ? fitted_marginal(fw.assignment)
                                                  : Marginal::uniform(k);
  std::vector<double> neg_log_r(k);
  for (int z = 0; z < k; ++z) neg_log_r[z] = -std::log(r.r[z]);
  // KL(p(Z|I) || r) as the batch mean of sum_z p (log p - log r); the
  // marginal is treated as a constant of the step.
  Tensor reg = scale(sum(mul(fw.probs, add_rowvec(log(fw.probs),
                                                  Tensor::constant({k}, neg_log_r)))),
                     1.0 / batch);

  LossParts parts;
  parts.reconstruction = recon.item();
  parts.regularizer = reg.item();

  out.total = add(recon, scale(reg, cfg.lambda_reg));
  out.breakdown = assemble(RegularizerKind::vib_kl, parts, cfg.beta, cfg.lambda_reg);
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer and training loop

void sgd_step(std::vector<Tensor>& params, double learning_rate) {
  for (Tensor& p : params) {
    auto g = p.grad();
    auto v = p.values_mut();
    for (size_t i = 0; i < v.size(); ++i) {
      v[i] -= learning_rate * g[i];
      if (!std::isfinite(v[i])) {
        throw std::runtime_error("sgd_step: parameter became non-finite");
      }
    }
    p.zero_grad();
  }
}

TrainResult train(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  if (data.n < 1 || data.dim < 1) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size > data.n) {
    throw std::invalid_argument("train: batch_size exceeds dataset size");
  }

  SplitMix64 rng(cfg.seed);
  std::vector<int> enc_widths{data.dim};
  enc_widths.insert(enc_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  enc_widths.push_back(cfg.code_dim);
  std::vector<int> dec_widths{cfg.code_dim};
  dec_widths.insert(dec_widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  dec_widths.push_back(data.dim);

  MLP enc = MLP::random(enc_widths, rng);
  MLP dec = MLP::random(dec_widths, rng);
  Codebook cb = Codebook::random(cfg.n_codes, cfg.code_dim, rng);

  std::vector<Tensor> params = enc.parameters();
  {
    auto dp = dec.parameters();
    params.insert(params.end(), dp.begin(), dp.end());
  }
  if (cfg.mode == TrainMode::hard_vqvae) params.push_back(cb.codes());

  // One seeded permutation fixed for the whole run; batches cycle through it.
  std::vector<int> perm(data.n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = data.n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.next() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  int cursor = 0;
  auto next_batch = [&] {
    std::vector<double> rows(static_cast<size_t>(cfg.batch_size) * data.dim);
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == data.n) cursor = 0;
      const double* src = data.rows.data() + static_cast<size_t>(perm[cursor++]) * data.dim;
      std::copy(src, src + data.dim, rows.begin() + static_cast<size_t>(b) * data.dim);
    }
    return Tensor::constant({cfg.batch_size, data.dim}, std::move(rows));
  };

  TrainResult result;
  result.trace.reserve(cfg.steps);

  for (int step = 1; step <= cfg.steps; ++step) {
    Tensor x = next_batch();
    Tape tape;
    TapeScope scope(tape);
    try {
      StepLoss loss = cfg.mode == TrainMode::hard_vqvae
                          ? hard_step_loss(x, enc, cb, dec, cfg)
                          : soft_step_loss(x, enc, cb, dec, cfg);
      if (!std::isfinite(loss.breakdown.total) || loss.breakdown.total > 1e6) {
        result.diverged = true;
        result.abort_reason =
            "total loss diverged at step " + std::to_string(step);
        break;
      }
      tape.backward(loss.total);
      sgd_step(params, cfg.learning_rate);
      if (cfg.mode == TrainMode::soft_em && step % cfg.em_every == 0) {
        cb = em_m_step(loss.z_e, loss.assignment, cb);
      }
      result.trace.push_back({step, loss.breakdown.reconstruction, loss.breakdown.commitment,
                              loss.breakdown.codebook, loss.breakdown.regularizer,
                              loss.breakdown.total, perplexity(loss.assignment),
                              conditional_entropy(loss.assignment)});
    } catch (const std::exception& e) {
      result.diverged = true;
      result.abort_reason = std::string(e.what()) + " at step " + std::to_string(step);
      break;
    }
  }

  result.encoder = std::move(enc);
  result.decoder = std::move(dec);
  result.codebook = std::move(cb);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint

void save_checkpoint(std::ostream& out, const TrainConfig& cfg, const MLP& enc,
                     const Codebook& cb, const MLP& dec) {
  out << "vqib-checkpoint " << train_config_echo(cfg) << '\n';
  out << "encoder_layers " << enc.n_layers() << '\n';
  for (int l = 0; l < enc.n_layers(); ++l) {
    const Tensor& w = enc.weight(l);
    write_matrix(out, w.rows(), w.cols(), w.values());
    write_matrix(out, 1, enc.bias(l).size(), enc.bias(l).values());
  }
  out << "codebook\n";
  cb.save(out);
  out << "decoder_layers " << dec.n_layers() << '\n';
  for (int l = 0; l < dec.n_layers(); ++l) {
    const Tensor& w = dec.weight(l);
    write_matrix(out, w.rows(), w.cols(), w.values());
    write_matrix(out, 1, dec.bias(l).size(), dec.bias(l).values());
  }
  out << "end\n";
}

namespace {

MLP read_mlp(std::istream& in, int n_layers) {
  std::vector<Tensor> weights, biases;
  for (int l = 0; l < n_layers; ++l) {
    int r = 0, c = 0;
    std::vector<double> w = read_matrix(in, r, c);
    weights.push_back(Tensor::parameter({r, c}, std::move(w)));
    int br = 0, bc = 0;
    std::vector<double> b = read_matrix(in, br, bc);
    if (br != 1 || bc != c) throw std::runtime_error("checkpoint: bias shape mismatch");
    biases.push_back(Tensor::parameter({bc}, std::move(b)));
  }
  return MLP::from_layers(std::move(weights), std::move(biases));
}

}  // namespace

Checkpoint load_checkpoint(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != "vqib-checkpoint") {
    throw std::runtime_error("checkpoint: bad header");
  }
  std::string echo;
  std::getline(in, echo);
  Checkpoint ck;
  ck.config = train_config_from_echo(echo);

  expect_token(in, "encoder_layers");
  int n_enc = 0;
  if (!(in >> n_enc) || n_enc < 1) throw std::runtime_error("checkpoint: bad encoder count");
  ck.encoder = read_mlp(in, n_enc);

  expect_token(in, "codebook");
  ck.codebook = Codebook::load(in);

  expect_token(in, "decoder_layers");
  int n_dec = 0;
  if (!(in >> n_dec) || n_dec < 1) throw std::runtime_error("checkpoint: bad decoder count");
  ck.decoder = read_mlp(in, n_dec);

  expect_token(in, "end");
  return ck;
}

}  // namespace vqib
