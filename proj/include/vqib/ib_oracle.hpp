#ifndef VQIB_IB_ORACLE_HPP
#define VQIB_IB_ORACLE_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "vqib/rng.hpp"

namespace vqib {

// All entropies and divergences below are in nats. 0*log(0) is taken as 0;
// a q(..)=0 term under positive p-weight yields +infinity rather than NaN.

// Finite joint distribution p(i, x) over N item indices and M feature symbols.
struct DiscreteIBProblem {
  int n_items = 0;    // N
  int n_symbols = 0;  // M
  std::vector<double> joint;  // N*M, row-major, sums to 1

  // Validates: entries >= 0, total 1 within 1e-12, every row sum positive.
  static DiscreteIBProblem create(int n_items, int n_symbols, std::vector<double> joint);
  // Entries are normalized exponentials of seeded uniforms, so every cell
  // is strictly positive.
  static DiscreteIBProblem random(int n_items, int n_symbols, SplitMix64& rng);

  double item_prob(int i) const;  // p(i), row sum

  static DiscreteIBProblem load(std::istream& in);
  void save(std::ostream& out) const;
};

// Encoder distribution p(z|i): one probability row per item.
struct Assignment {
  int n_items = 0;
  int n_codes = 0;  // K
  std::vector<double> cond;  // N*K, rows sum to 1

  static Assignment create(int n_items, int n_codes, std::vector<double> cond);
  static Assignment random(int n_items, int n_codes, SplitMix64& rng);
  // One-hot rows from an item->code map.
  static Assignment deterministic(const std::vector<int>& code_of_item, int n_codes);
};

// Variational marginal r(z).
struct Marginal {
  std::vector<double> r;

  static Marginal create(std::vector<double> r);
  static Marginal uniform(int n_codes);
  static Marginal random(int n_codes, SplitMix64& rng);
};

struct InducedQuantities {
  std::vector<double> pz;          // K
  std::vector<double> px_given_z;  // K*M; rows with pz=0 are zero-filled
  std::vector<bool> z_defined;     // pz > 0, i.e. p(x|z) well defined
  double mutual_information = 0.0;   // I(I;Z)
  double entropy_z = 0.0;            // H(Z)
  double cond_entropy_z_given_i = 0.0;  // H(Z|I)
};

InducedQuantities induced_quantities(const DiscreteIBProblem& prob, const Assignment& a);

struct IbDistortion {
  double value = 0.0;           // sum_i sum_z p(i)p(z|i) KL(p(x|i) || p(x|z))
  double h_x_given_z = 0.0;     // first decomposition term
  double h_x_given_i = 0.0;     // second (data-only) decomposition term
  bool infinite = false;
};

// Returns the distortion both directly and through its two-term
// decomposition (value should equal h_x_given_z - h_x_given_i).
IbDistortion ib_distortion(const DiscreteIBProblem& prob, const Assignment& a);

// Gap of the reconstruction bound: cross entropy of q against the induced
// p(x|z) minus the exact conditional entropy. Nonnegative; zero at q = p(x|z).
// q is K*M, rows are probability vectors.
double verify_reconstruction_bound(const DiscreteIBProblem& prob, const Assignment& a,
                                   const std::vector<double>& q);

// Gap KL(p(Z|I) || r) - I(I;Z). Nonnegative; zero at r = induced p(z).
double verify_marginal_bound(const DiscreteIBProblem& prob, const Assignment& a,
                             const Marginal& r);

// Gap H(p(Z|I), r) - H(Z). Nonnegative; zero iff r = induced p(z).
double verify_entropy_bound(const DiscreteIBProblem& prob, const Assignment& a,
                            const Marginal& r);

struct KlDecomposition {
  double kl = 0.0;             // KL(p(Z|I) || r), p(i)-weighted
  double cross_entropy = 0.0;  // H(p(Z|I), r)
  double cond_entropy = 0.0;   // H(Z|I)
};

// kl should equal cross_entropy - cond_entropy.
KlDecomposition kl_decomposition_check(const DiscreteIBProblem& prob, const Assignment& a,
                                       const Marginal& r);

struct DibSearchResult {
  std::vector<int> assignment;  // item -> code
  double objective = 0.0;
};

// Deterministic-assignment DIB objective: d_IB + beta * H(Z).
double dib_objective(const DiscreteIBProblem& prob, const std::vector<int>& code_of_item,
                     int n_codes, double beta);

// Enumerates all K^N deterministic assignments (capped at 10^6) in
// lexicographic order and returns the strict minimizer, so exact ties
// resolve to the lexicographically smallest assignment vector.
DibSearchResult exhaustive_dib_search(const DiscreteIBProblem& prob, int n_codes,
                                      double beta);

// One row of the randomized verification sweep.
struct BoundSweepRow {
  std::uint64_t instance_seed = 0;
  std::string bound_name;
  double gap = 0.0;
};

// Per instance: the three bound gaps against random variational
// distributions, the same gaps at the induced distributions (suffix _eq),
// and the two identity residuals (kl_identity, dib_identity). Instance
// seeds run seed, seed+1, ..., so rows come out sorted.
std::vector<BoundSweepRow> bound_sweep(int n_instances, std::uint64_t seed,
                                       int max_items = 6, int max_symbols = 5,
                                       int max_codes = 4);

// True when every sweep row is within its tolerance: plain gaps down to
// -1e-12, equality gaps and identity residuals within 1e-10 in magnitude.
bool bound_sweep_passes(const std::vector<BoundSweepRow>& rows);

}  // namespace vqib

#endif
