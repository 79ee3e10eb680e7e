#ifndef VQIB_VQ_BOTTLENECK_HPP
#define VQIB_VQ_BOTTLENECK_HPP

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "vqib/rng.hpp"
#include "vqib/tensor.hpp"

namespace vqib {

// K codewords in R^dim held as a (possibly trainable) parameter tensor.
class Codebook {
 public:
  Codebook(int n_codes, int dim, std::vector<double> codes, bool learnable = true);
  // Rows drawn uniformly from [-1, 1]^dim.
  static Codebook random(int n_codes, int dim, SplitMix64& rng, bool learnable = true);

  int n_codes() const { return n_codes_; }
  int dim() const { return dim_; }
  bool learnable() const { return learnable_; }
  const Tensor& codes() const { return codes_; }
  Tensor& codes() { return codes_; }
  std::span<const double> codeword(int j) const { return codes_.row(j); }

  // Plain text: "K dim" then K rows, 17 significant digits.
  void save(std::ostream& out) const;
  static Codebook load(std::istream& in, bool learnable = true);

 private:
  int n_codes_;
  int dim_;
  bool learnable_;
  Tensor codes_;
};

// Per-row distribution p(z|i) over the K codewords, optionally one-hot.
struct AssignmentBatch {
  int batch = 0;
  int n_codes = 0;
  std::vector<double> probs;  // batch*K, rows sum to 1 within 1e-10
  std::optional<std::vector<int>> hard_index;

  static AssignmentBatch hard(const std::vector<int>& indices, int n_codes);
  static AssignmentBatch soft(int batch, int n_codes, std::vector<double> probs);
  std::span<const double> row(int b) const;
};

// argmin_j ||z_e - e_j||_2; ties break to the lowest index.
int nearest_codeword(std::span<const double> z_e, const Codebook& cb);

struct QuantizeResult {
  Tensor z_q;                // B x dim, rows are exact codewords
  std::vector<int> indices;  // per-row nearest codeword
};

// Hard quantization with the straight-through gradient rule: the backward
// pass copies d/dz_q to d/dz_e and leaves the codebook untouched.
QuantizeResult straight_through_quantize(const Tensor& z_e, const Codebook& cb);

// mean_b ||z_e[b] - sg(z_q[b])||^2; gradient reaches only the encoder side.
Tensor commitment_loss(const Tensor& z_e, const Tensor& z_q);

// mean_b ||sg(z_e[b]) - e_idx[b]||^2; gradient reaches only the selected
// codewords.
Tensor codebook_loss(const Tensor& z_e, const Codebook& cb, const std::vector<int>& indices);

// Distance-based responsibilities, softmax of negative squared distances
// (computed with max subtraction).
AssignmentBatch soft_assignment(const Tensor& z_e, const Codebook& cb);

// Responsibility-weighted mean update. Codewords whose total responsibility
// falls below 1e-8 are left unchanged.
Codebook em_m_step(const Tensor& z_e, const AssignmentBatch& a, const Codebook& cb);

// sum_{b,z} probs[b][z] ||z_e[b] - e_z||^2, the quantity em_m_step never
// increases.
double expected_distortion(const Tensor& z_e, const AssignmentBatch& a, const Codebook& cb);

// exp(entropy of the batch-mean assignment row); effective codebook usage.
double perplexity(const AssignmentBatch& a);

// Batch mean of per-row entropies; exactly zero for one-hot rows.
double conditional_entropy(const AssignmentBatch& a);

}  // namespace vqib

#endif
