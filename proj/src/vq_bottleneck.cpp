#include "vqib/vq_bottleneck.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace vqib {

namespace {

void require_batch_matrix(const Tensor& t, const char* what) {
  if (!t.defined() || t.shape().size() != 2) {
    throw std::invalid_argument(std::string(what) + ": expected a rank-2 tensor");
  }
  if (t.rows() < 1) throw std::invalid_argument(std::string(what) + ": empty batch");
}

}  // namespace

// ---------------------------------------------------------------------------
// Codebook

Codebook::Codebook(int n_codes, int dim, std::vector<double> codes, bool learnable)
    : n_codes_(n_codes), dim_(dim), learnable_(learnable) {
  if (n_codes < 1 || dim < 1) {
    throw std::invalid_argument("codebook needs K >= 1 and dim >= 1");
  }
  if (codes.size() != static_cast<size_t>(n_codes) * dim) {
    throw std::invalid_argument("codebook data length does not match K x dim");
  }
  codes_ = learnable ? Tensor::parameter({n_codes, dim}, std::move(codes))
                     : Tensor::constant({n_codes, dim}, std::move(codes));
}

Codebook Codebook::random(int n_codes, int dim, SplitMix64& rng, bool learnable) {
  std::vector<double> codes(static_cast<size_t>(n_codes) * dim);
  for (double& v : codes) v = rng.uniform(-1.0, 1.0);
  return Codebook(n_codes, dim, std::move(codes), learnable);
}

void Codebook::save(std::ostream& out) const {
  out << n_codes_ << ' ' << dim_ << '\n';
  char buf[32];
  auto v = codes_.values();
  for (int j = 0; j < n_codes_; ++j) {
    for (int c = 0; c < dim_; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", v[static_cast<size_t>(j) * dim_ + c]);
      out << buf << (c + 1 == dim_ ? '\n' : ' ');
    }
  }
}

Codebook Codebook::load(std::istream& in, bool learnable) {
  int k = 0, d = 0;
  if (!(in >> k >> d)) throw std::runtime_error("codebook file: missing K dim header");
  if (k < 1 || d < 1) throw std::runtime_error("codebook file: invalid dimensions");
  std::vector<double> codes(static_cast<size_t>(k) * d);
  for (size_t i = 0; i < codes.size(); ++i) {
    if (!(in >> codes[i])) {
      throw std::runtime_error("codebook file: failed reading entry " + std::to_string(i + 1));
    }
    if (!std::isfinite(codes[i])) {
      throw std::runtime_error("codebook file: non-finite entry");
    }
  }
  return Codebook(k, d, std::move(codes), learnable);
}

// ---------------------------------------------------------------------------
// AssignmentBatch

AssignmentBatch AssignmentBatch::hard(const std::vector<int>& indices, int n_codes) {
  if (indices.empty()) throw std::invalid_argument("assignment batch is empty");
  if (n_codes < 1) throw std::invalid_argument("n_codes must be positive");
  AssignmentBatch a;
  a.batch = static_cast<int>(indices.size());
  a.n_codes = n_codes;
  a.probs.assign(static_cast<size_t>(a.batch) * n_codes, 0.0);
  for (int b = 0; b < a.batch; ++b) {
    int z = indices[b];
    if (z < 0 || z >= n_codes) throw std::invalid_argument("hard index out of range");
    a.probs[static_cast<size_t>(b) * n_codes + z] = 1.0;
  }
  a.hard_index = indices;
  return a;
}

AssignmentBatch AssignmentBatch::soft(int batch, int n_codes, std::vector<double> probs) {
  if (batch < 1 || n_codes < 1) throw std::invalid_argument("assignment batch is empty");
  if (probs.size() != static_cast<size_t>(batch) * n_codes) {
    throw std::invalid_argument("assignment probs length does not match batch x K");
  }
  for (int b = 0; b < batch; ++b) {
    double row = 0.0;
    for (int z = 0; z < n_codes; ++z) {
      double v = probs[static_cast<size_t>(b) * n_codes + z];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("assignment probs must be finite and nonnegative");
      }
      row += v;
    }
    if (std::abs(row - 1.0) > 1e-10) {
      throw std::invalid_argument("assignment rows must sum to 1 within 1e-10");
    }
  }
  AssignmentBatch a;
  a.batch = batch;
  a.n_codes = n_codes;
  a.probs = std::move(probs);
  return a;
}

std::span<const double> AssignmentBatch::row(int b) const {
  return std::span<const double>(probs).subspan(static_cast<size_t>(b) * n_codes, n_codes);
}

// ---------------------------------------------------------------------------
// Quantization

int nearest_codeword(std::span<const double> z_e, const Codebook& cb) {
  if (static_cast<int>(z_e.size()) != cb.dim()) {
    throw std::invalid_argument("nearest_codeword: dimension mismatch");
  }
  int best = 0;
  double best_d = detail::sqdist(z_e, cb.codeword(0));
  for (int j = 1; j < cb.n_codes(); ++j) {
    double d = detail::sqdist(z_e, cb.codeword(j));
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

QuantizeResult straight_through_quantize(const Tensor& z_e, const Codebook& cb) {
  require_batch_matrix(z_e, "straight_through_quantize");
  if (z_e.cols() != cb.dim()) {
    throw std::invalid_argument("straight_through_quantize: dimension mismatch");
  }
  const int batch = z_e.rows(), dim = cb.dim();
  QuantizeResult out;
  out.indices.resize(batch);
  std::vector<double> quantized(static_cast<size_t>(batch) * dim);
  for (int b = 0; b < batch; ++b) {
    int j = nearest_codeword(z_e.row(b), cb);
    out.indices[b] = j;
    auto code = cb.codeword(j);
    std::copy(code.begin(), code.end(), quantized.begin() + static_cast<size_t>(b) * dim);
  }
  out.z_q = straight_through(z_e, std::move(quantized));
  return out;
}

Tensor commitment_loss(const Tensor& z_e, const Tensor& z_q) {
  require_batch_matrix(z_e, "commitment_loss");
  return scale(sum_sqdiff(z_e, stop_gradient(z_q)), 1.0 / z_e.rows());
}

Tensor codebook_loss(const Tensor& z_e, const Codebook& cb, const std::vector<int>& indices) {
  require_batch_matrix(z_e, "codebook_loss");
  if (static_cast<int>(indices.size()) != z_e.rows()) {
    throw std::invalid_argument("codebook_loss: one index per batch row required");
  }
  Tensor selected = gather_rows(cb.codes(), indices);
  return scale(sum_sqdiff(selected, stop_gradient(z_e)), 1.0 / z_e.rows());
}

AssignmentBatch soft_assignment(const Tensor& z_e, const Codebook& cb) {
  require_batch_matrix(z_e, "soft_assignment");
  if (z_e.cols() != cb.dim()) {
    throw std::invalid_argument("soft_assignment: dimension mismatch");
  }
  const int batch = z_e.rows(), k = cb.n_codes();
  std::vector<double> probs(static_cast<size_t>(batch) * k);
  std::vector<double> neg_d2(k);
  for (int b = 0; b < batch; ++b) {
    auto ze_row = z_e.row(b);
    for (int j = 0; j < k; ++j) neg_d2[j] = -1.0 * detail::sqdist(ze_row, cb.codeword(j));
    detail::softmax_row(neg_d2, std::span<double>(probs).subspan(
                                    static_cast<size_t>(b) * k, k));
  }
  return AssignmentBatch::soft(batch, k, std::move(probs));
}

Codebook em_m_step(const Tensor& z_e, const AssignmentBatch& a, const Codebook& cb) {
  require_batch_matrix(z_e, "em_m_step");
  const int batch = z_e.rows(), dim = cb.dim(), k = cb.n_codes();
  if (a.batch != batch || a.n_codes != k) {
    throw std::invalid_argument("em_m_step: assignment does not match batch/codebook");
  }

  std::vector<double> responsibility(k, 0.0);
  std::vector<double> weighted(static_cast<size_t>(k) * dim, 0.0);
  for (int b = 0; b < batch; ++b) {
    auto ze_row = z_e.row(b);
    for (int z = 0; z < k; ++z) {
      double w = a.probs[static_cast<size_t>(b) * k + z];
      if (w == 0.0) continue;
      responsibility[z] += w;
      for (int c = 0; c < dim; ++c) {
        weighted[static_cast<size_t>(z) * dim + c] += w * ze_row[c];
      }
    }
  }

  std::vector<double> codes(cb.codes().values().begin(), cb.codes().values().end());
  for (int z = 0; z < k; ++z) {
    if (responsibility[z] < 1e-8) continue;  // dead codeword, frozen
    for (int c = 0; c < dim; ++c) {
      codes[static_cast<size_t>(z) * dim + c] =
          weighted[static_cast<size_t>(z) * dim + c] / responsibility[z];
    }
  }
  return Codebook(k, dim, std::move(codes), cb.learnable());
}

double expected_distortion(const Tensor& z_e, const AssignmentBatch& a, const Codebook& cb) {
  require_batch_matrix(z_e, "expected_distortion");
  const int batch = z_e.rows(), k = cb.n_codes();
  if (a.batch != batch || a.n_codes != k) {
    throw std::invalid_argument("expected_distortion: assignment does not match batch/codebook");
  }
  double acc = 0.0;
  for (int b = 0; b < batch; ++b) {
    auto ze_row = z_e.row(b);
    for (int z = 0; z < k; ++z) {
      double w = a.probs[static_cast<size_t>(b) * k + z];
      if (w > 0.0) acc += w * detail::sqdist(ze_row, cb.codeword(z));
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Diagnostics

double perplexity(const AssignmentBatch& a) {
  std::vector<double> mean(a.n_codes, 0.0);
  for (int b = 0; b < a.batch; ++b) {
    for (int z = 0; z < a.n_codes; ++z) {
      mean[z] += a.probs[static_cast<size_t>(b) * a.n_codes + z];
    }
  }
  double h = 0.0;
  for (double& v : mean) {
    v /= a.batch;
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::exp(h);
}

double conditional_entropy(const AssignmentBatch& a) {
  double acc = 0.0;
  for (int b = 0; b < a.batch; ++b) {
    for (int z = 0; z < a.n_codes; ++z) {
      double v = a.probs[static_cast<size_t>(b) * a.n_codes + z];
      if (v > 0.0) acc -= v * std::log(v);
    }
  }
  return acc / a.batch;
}

}  // namespace vqib
