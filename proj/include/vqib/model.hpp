#ifndef VQIB_MODEL_HPP
#define VQIB_MODEL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vqib/data_synth.hpp"
#include "vqib/ib_losses.hpp"
#include "vqib/rng.hpp"
#include "vqib/tensor.hpp"
#include "vqib/vq_bottleneck.hpp"

namespace vqib {

// Fully connected net, relu on hidden layers, identity output.
class MLP {
 public:
  MLP() = default;
  // Weights uniform in [-0.5, 0.5] scaled by 1/sqrt(fan_in); biases zero.
  static MLP random(const std::vector<int>& widths, SplitMix64& rng);
  static MLP from_layers(std::vector<Tensor> weights, std::vector<Tensor> biases);

  Tensor forward(const Tensor& x) const;
  std::vector<Tensor> parameters() const;
  const std::vector<int>& widths() const { return widths_; }
  int n_layers() const { return static_cast<int>(weights_.size()); }
  const Tensor& weight(int layer) const { return weights_[layer]; }
  const Tensor& bias(int layer) const { return biases_[layer]; }

 private:
  std::vector<int> widths_;
  std::vector<Tensor> weights_;  // widths[l] x widths[l+1]
  std::vector<Tensor> biases_;   // length widths[l+1]
};

enum class TrainMode { hard_vqvae, soft_em };
enum class MarginalKind { uniform, fitted };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);
std::string to_string(MarginalKind kind);
MarginalKind marginal_kind_from_string(const std::string& s);

struct TrainConfig {
  std::uint64_t seed = 1;
  int batch_size = 64;
  int steps = 1000;
  double learning_rate = 0.05;
  int n_codes = 16;  // K
  int code_dim = 2;
  double beta = 0.25;
  double lambda_reg = 0.0;
  TrainMode mode = TrainMode::hard_vqvae;
  RegularizerKind regularizer_kind = RegularizerKind::none;
  MarginalKind r_kind = MarginalKind::uniform;
  int em_every = 1;
  std::vector<int> hidden = {16};

  // Throws std::invalid_argument on bad values or an invalid
  // mode/regularizer pairing (hard_vqvae takes none or vdib_cross_entropy,
  // soft_em takes vib_kl).
  void validate() const;
};

// Single-line "key=value ..." form, parseable by train_config_from_echo.
std::string train_config_echo(const TrainConfig& cfg);
TrainConfig train_config_from_echo(const std::string& line);

struct MetricsRecord {
  int step = 0;
  double recon = 0.0;
  double commitment = 0.0;
  double codebook = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
  double perplexity = 0.0;
  double cond_entropy = 0.0;
};

using MetricsTrace = std::vector<MetricsRecord>;

struct HardForward {
  Tensor x_hat;
  Tensor z_e;
  Tensor z_q;
  std::vector<int> indices;
};

struct SoftForward {
  Tensor x_hat;
  Tensor z_e;
  Tensor probs;  // B x K, on the tape; codebook enters through stop_gradient
  AssignmentBatch assignment;
};

// A non-finite value in any stage aborts with the stage name
// (encoder / quantizer / decoder).
HardForward forward_hard(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec);
SoftForward forward_soft(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec);

struct StepLoss {
  Tensor total;  // scalar, lives on the active tape
  Tensor z_e;
  Tensor x_hat;
  LossBreakdown breakdown;
  AssignmentBatch assignment;
  std::vector<int> indices;  // hard mode only
};

// Full per-batch loss graphs; shared by the training loop, evaluation and
// the gradient-check tests.
StepLoss hard_step_loss(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec,
                        const TrainConfig& cfg);
StepLoss soft_step_loss(const Tensor& x, const MLP& enc, const Codebook& cb, const MLP& dec,
                        const TrainConfig& cfg);

// p <- p - lr * grad for every parameter, then grads are zeroed.
void sgd_step(std::vector<Tensor>& params, double learning_rate);

struct TrainResult {
  MLP encoder;
  MLP decoder;
  Codebook codebook{1, 1, {0.0}};
  MetricsTrace trace;
  bool diverged = false;
  std::string abort_reason;
};

// Runs cfg.steps SGD steps. Hard mode moves the codebook only through the
// codebook loss gradient; soft mode moves it only through em_m_step after
// each gradient step. Bit-reproducible given (seed, config, dataset).
// Divergence (total > 1e6 or a non-finite value anywhere) stops the run,
// keeps the trace up to the last good step and sets `diverged`.
TrainResult train(const TrainConfig& cfg, const Dataset& data);

struct Checkpoint {
  TrainConfig config;
  MLP encoder;
  MLP decoder;
  Codebook codebook{1, 1, {0.0}};
};

// Plain-text checkpoint: one header line with the config echo, then the
// encoder, codebook and decoder as "rows cols" matrices at 17 significant
// digits.
void save_checkpoint(std::ostream& out, const TrainConfig& cfg, const MLP& enc,
                     const Codebook& cb, const MLP& dec);
Checkpoint load_checkpoint(std::istream& in);

}  // namespace vqib

#endif
