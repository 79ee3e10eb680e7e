#ifndef VQIB_IB_LOSSES_HPP
#define VQIB_IB_LOSSES_HPP

#include <optional>
#include <string>

#include "vqib/ib_oracle.hpp"
#include "vqib/tensor.hpp"
#include "vqib/vq_bottleneck.hpp"

namespace vqib {

enum class RegularizerKind { none, vdib_cross_entropy, vib_kl };

std::string to_string(RegularizerKind kind);
RegularizerKind regularizer_kind_from_string(const std::string& s);

struct LossBreakdown {
  double reconstruction = 0.0;
  double commitment = 0.0;
  double codebook = 0.0;
  double regularizer = 0.0;  // raw, unweighted value
  double total = 0.0;
  double beta = 0.0;
  double lambda_reg = 0.0;
  RegularizerKind kind = RegularizerKind::none;
};

struct LossParts {
  double reconstruction = 0.0;
  std::optional<double> commitment;
  std::optional<double> codebook;
  std::optional<double> regularizer;
};

// Mean squared error over all B*D entries. Equals the unit-variance
// Gaussian decoder negative log-likelihood up to scale and constant.
double reconstruction_loss(const Tensor& x, const Tensor& x_hat);

// Empirical cross entropy H(p(Z|I), r) = (1/B) sum_b sum_z p[b][z] (-log r[z]).
// Returns +infinity if r[z] = 0 somewhere p[b][z] > 0.
double vdib_regularizer(const AssignmentBatch& a, const Marginal& r);

// KL(p(Z|I) || r) through the cross-entropy-minus-conditional-entropy
// decomposition.
double vib_regularizer(const AssignmentBatch& a, const Marginal& r);

// The same KL computed directly as the batch mean of row-wise divergences;
// kept as an independent route for checking the decomposition.
double vib_regularizer_direct(const AssignmentBatch& a, const Marginal& r);

// Batch-mean assignment row, the r that minimizes vdib_regularizer.
Marginal fitted_marginal(const AssignmentBatch& a);

// Totals per kind:
//   none:               recon + beta*commitment + codebook
//   vdib_cross_entropy: recon + beta*commitment + codebook + lambda*reg
//   vib_kl:             recon + lambda*reg   (quantization terms live in EM)
// Missing required parts throw std::invalid_argument.
LossBreakdown assemble(RegularizerKind kind, const LossParts& parts, double beta,
                       double lambda_reg);

}  // namespace vqib

#endif
