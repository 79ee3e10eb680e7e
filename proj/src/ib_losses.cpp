#include "vqib/ib_losses.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vqib {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::none: return "none";
    case RegularizerKind::vdib_cross_entropy: return "vdib_cross_entropy";
    case RegularizerKind::vib_kl: return "vib_kl";
  }
  return "none";
}

RegularizerKind regularizer_kind_from_string(const std::string& s) {
  if (s == "none") return RegularizerKind::none;
  if (s == "vdib_cross_entropy") return RegularizerKind::vdib_cross_entropy;
  if (s == "vib_kl") return RegularizerKind::vib_kl;
  throw std::invalid_argument("unknown regularizer_kind: " + s);
}

double reconstruction_loss(const Tensor& x, const Tensor& x_hat) {
  if (!x.defined() || !x_hat.defined() || x.shape() != x_hat.shape()) {
    throw std::invalid_argument("reconstruction_loss: shape mismatch");
  }
  auto a = x.values();
  auto b = x_hat.values();
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double vdib_regularizer(const AssignmentBatch& a, const Marginal& r) {
  if (static_cast<int>(r.r.size()) != a.n_codes) {
    throw std::invalid_argument("vdib_regularizer: marginal size does not match K");
  }
  double acc = 0.0;
  for (int b = 0; b < a.batch; ++b) {
    for (int z = 0; z < a.n_codes; ++z) {
      double p = a.probs[static_cast<size_t>(b) * a.n_codes + z];
      if (p > 0.0) {
        if (r.r[z] <= 0.0) return kInf;
        acc -= p * std::log(r.r[z]);
      }
    }
  }
  return acc / a.batch;
}

double vib_regularizer(const AssignmentBatch& a, const Marginal& r) {
  return vdib_regularizer(a, r) - conditional_entropy(a);
}

double vib_regularizer_direct(const AssignmentBatch& a, const Marginal& r) {
  if (static_cast<int>(r.r.size()) != a.n_codes) {
    throw std::invalid_argument("vib_regularizer: marginal size does not match K");
  }
  double acc = 0.0;
  for (int b = 0; b < a.batch; ++b) {
    for (int z = 0; z < a.n_codes; ++z) {
      double p = a.probs[static_cast<size_t>(b) * a.n_codes + z];
      if (p > 0.0) {
        if (r.r[z] <= 0.0) return kInf;
        acc += p * std::log(p / r.r[z]);
      }
    }
  }
  return acc / a.batch;
}

Marginal fitted_marginal(const AssignmentBatch& a) {
  std::vector<double> mean(a.n_codes, 0.0);
  for (int b = 0; b < a.batch; ++b) {
    for (int z = 0; z < a.n_codes; ++z) {
      mean[z] += a.probs[static_cast<size_t>(b) * a.n_codes + z];
    }
  }
  double total = 0.0;
  for (double& v : mean) {
    v /= a.batch;
    total += v;
  }
  // Rows sum to 1 within 1e-10 each; renormalize so Marginal's tighter
  // 1e-12 check cannot trip on accumulated rounding.
  for (double& v : mean) v /= total;
  return Marginal::create(std::move(mean));
}

LossBreakdown assemble(RegularizerKind kind, const LossParts& parts, double beta,
                       double lambda_reg) {
  if (!(beta >= 0.0) || !(lambda_reg >= 0.0)) {
    throw std::invalid_argument("assemble: beta and lambda_reg must be nonnegative");
  }
  LossBreakdown out;
  out.kind = kind;
  out.beta = beta;
  out.lambda_reg = lambda_reg;
  out.reconstruction = parts.reconstruction;

  switch (kind) {
    case RegularizerKind::none:
      if (!parts.commitment || !parts.codebook) {
        throw std::invalid_argument("assemble: kind=none needs commitment and codebook parts");
      }
      out.commitment = *parts.commitment;
      out.codebook = *parts.codebook;
      out.total = out.reconstruction + beta * out.commitment + out.codebook;
      break;
    case RegularizerKind::vdib_cross_entropy:
      if (!parts.commitment || !parts.codebook || !parts.regularizer) {
        throw std::invalid_argument(
            "assemble: kind=vdib_cross_entropy needs commitment, codebook and regularizer parts");
      }
      out.commitment = *parts.commitment;
      out.codebook = *parts.codebook;
      out.regularizer = *parts.regularizer;
      out.total = out.reconstruction + beta * out.commitment + out.codebook +
                  lambda_reg * out.regularizer;
      break;
    case RegularizerKind::vib_kl:
      if (!parts.regularizer) {
        throw std::invalid_argument("assemble: kind=vib_kl needs a regularizer part");
      }
      out.commitment = parts.commitment.value_or(0.0);
      out.codebook = parts.codebook.value_or(0.0);
      out.regularizer = *parts.regularizer;
      out.total = out.reconstruction + lambda_reg * out.regularizer;
      break;
  }
  return out;
}

}  // namespace vqib
