#include "vqib/ib_oracle.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vqib {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double entropy(const double* p, int n) {
  double h = 0.0;
  for (int i = 0; i < n; ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h;
}

// KL on rows; the ratio form keeps KL(p||p) exactly zero bitwise.
double kl_rows(const double* p, const double* q, int n, bool* hit_zero) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (p[i] > 0.0) {
      if (q[i] <= 0.0) {
        if (hit_zero) *hit_zero = true;
        return kInf;
      }
      acc += p[i] * std::log(p[i] / q[i]);
    }
  }
  return acc;
}

std::vector<double> normalized_exp_uniforms(int n, SplitMix64& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = std::exp(rng.uniform(0.0, 4.0));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

void require_dims(const DiscreteIBProblem& prob, const Assignment& a) {
  if (prob.n_items != a.n_items) {
    throw std::invalid_argument("assignment rows do not match problem items");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Types

DiscreteIBProblem DiscreteIBProblem::create(int n_items, int n_symbols,
                                            std::vector<double> joint) {
  if (n_items < 1 || n_symbols < 1) {
    throw std::invalid_argument("problem dimensions must be positive");
  }
  if (joint.size() != static_cast<size_t>(n_items) * n_symbols) {
    throw std::invalid_argument("joint size does not match dimensions");
  }
  double total = 0.0;
  for (double v : joint) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("joint entries must be finite and nonnegative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("joint must sum to 1 within 1e-12");
  }
  for (int i = 0; i < n_items; ++i) {
    double row = 0.0;
    for (int x = 0; x < n_symbols; ++x) row += joint[static_cast<size_t>(i) * n_symbols + x];
    if (!(row > 0.0)) throw std::invalid_argument("every item must have positive probability");
  }
  DiscreteIBProblem p;
  p.n_items = n_items;
  p.n_symbols = n_symbols;
  p.joint = std::move(joint);
  return p;
}

DiscreteIBProblem DiscreteIBProblem::random(int n_items, int n_symbols, SplitMix64& rng) {
  return create(n_items, n_symbols, normalized_exp_uniforms(n_items * n_symbols, rng));
}

double DiscreteIBProblem::item_prob(int i) const {
  double row = 0.0;
  for (int x = 0; x < n_symbols; ++x) row += joint[static_cast<size_t>(i) * n_symbols + x];
  return row;
}

DiscreteIBProblem DiscreteIBProblem::load(std::istream& in) {
  int n = 0, m = 0;
  if (!(in >> n >> m)) throw std::runtime_error("problem file: missing N M header");
  if (n < 1 || m < 1) throw std::runtime_error("problem file: invalid dimensions");
  std::vector<double> joint(static_cast<size_t>(n) * m);
  for (size_t i = 0; i < joint.size(); ++i) {
    if (!(in >> joint[i])) {
      throw std::runtime_error("problem file: expected " + std::to_string(joint.size()) +
                               " entries, failed at entry " + std::to_string(i + 1));
    }
  }
  return create(n, m, std::move(joint));
}

void DiscreteIBProblem::save(std::ostream& out) const {
  out << n_items << ' ' << n_symbols << '\n';
  char buf[32];
  for (int i = 0; i < n_items; ++i) {
    for (int x = 0; x < n_symbols; ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", joint[static_cast<size_t>(i) * n_symbols + x]);
      out << buf << (x + 1 == n_symbols ? '\n' : ' ');
    }
  }
}

Assignment Assignment::create(int n_items, int n_codes, std::vector<double> cond) {
  if (n_items < 1 || n_codes < 1) {
    throw std::invalid_argument("assignment dimensions must be positive");
  }
  if (cond.size() != static_cast<size_t>(n_items) * n_codes) {
    throw std::invalid_argument("assignment size does not match dimensions");
  }
  for (int i = 0; i < n_items; ++i) {
    double row = 0.0;
    for (int z = 0; z < n_codes; ++z) {
      double v = cond[static_cast<size_t>(i) * n_codes + z];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("assignment entries must be finite and nonnegative");
      }
      row += v;
    }
    if (std::abs(row - 1.0) > 1e-12) {
      throw std::invalid_argument("assignment rows must sum to 1 within 1e-12");
    }
  }
  Assignment a;
  a.n_items = n_items;
  a.n_codes = n_codes;
  a.cond = std::move(cond);
  return a;
}

Assignment Assignment::random(int n_items, int n_codes, SplitMix64& rng) {
  std::vector<double> cond;
  cond.reserve(static_cast<size_t>(n_items) * n_codes);
  for (int i = 0; i < n_items; ++i) {
    auto row = normalized_exp_uniforms(n_codes, rng);
    cond.insert(cond.end(), row.begin(), row.end());
  }
  return create(n_items, n_codes, std::move(cond));
}

Assignment Assignment::deterministic(const std::vector<int>& code_of_item, int n_codes) {
  int n = static_cast<int>(code_of_item.size());
  std::vector<double> cond(static_cast<size_t>(n) * n_codes, 0.0);
  for (int i = 0; i < n; ++i) {
    int z = code_of_item[i];
    if (z < 0 || z >= n_codes) throw std::invalid_argument("code index out of range");
    cond[static_cast<size_t>(i) * n_codes + z] = 1.0;
  }
  return create(n, n_codes, std::move(cond));
}

Marginal Marginal::create(std::vector<double> r) {
  if (r.empty()) throw std::invalid_argument("marginal must be nonempty");
  double total = 0.0;
  for (double v : r) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("marginal entries must be finite and nonnegative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("marginal must sum to 1 within 1e-12");
  }
  Marginal m;
  m.r = std::move(r);
  return m;
}

Marginal Marginal::uniform(int n_codes) {
  if (n_codes < 1) throw std::invalid_argument("marginal size must be positive");
  // Exact normalization: remainder folded into the last entry.
  std::vector<double> r(n_codes, 1.0 / n_codes);
  double total = 0.0;
  for (int i = 0; i + 1 < n_codes; ++i) total += r[i];
  r[n_codes - 1] = 1.0 - total;
  return create(std::move(r));
}

Marginal Marginal::random(int n_codes, SplitMix64& rng) {
  return create(normalized_exp_uniforms(n_codes, rng));
}

// ---------------------------------------------------------------------------
// Quantities

InducedQuantities induced_quantities(const DiscreteIBProblem& prob, const Assignment& a) {
  require_dims(prob, a);
  const int N = prob.n_items, M = prob.n_symbols, K = a.n_codes;
  InducedQuantities out;
  out.pz.assign(K, 0.0);
  out.px_given_z.assign(static_cast<size_t>(K) * M, 0.0);
  out.z_defined.assign(K, false);

  std::vector<double> pi(N);
  for (int i = 0; i < N; ++i) pi[i] = prob.item_prob(i);

  for (int z = 0; z < K; ++z) {
    for (int i = 0; i < N; ++i) out.pz[z] += pi[i] * a.cond[static_cast<size_t>(i) * K + z];
  }

  // p(x|z) = sum_i p(i,x) p(z|i) / p(z)  (chain rule through the Markov chain)
  for (int z = 0; z < K; ++z) {
    if (out.pz[z] > 0.0) {
      out.z_defined[z] = true;
      for (int x = 0; x < M; ++x) {
        double acc = 0.0;
        for (int i = 0; i < N; ++i) {
          acc += prob.joint[static_cast<size_t>(i) * M + x] *
                 a.cond[static_cast<size_t>(i) * K + z];
        }
        out.px_given_z[static_cast<size_t>(z) * M + x] = acc / out.pz[z];
      }
    }
  }

  double mi = 0.0, hzi = 0.0;
  for (int i = 0; i < N; ++i) {
    for (int z = 0; z < K; ++z) {
      double c = a.cond[static_cast<size_t>(i) * K + z];
      if (c > 0.0) {
        mi += pi[i] * c * std::log(c / out.pz[z]);
        hzi -= pi[i] * c * std::log(c);
      }
    }
  }
  out.mutual_information = mi;
  out.entropy_z = entropy(out.pz);
  out.cond_entropy_z_given_i = hzi;
  return out;
}

IbDistortion ib_distortion(const DiscreteIBProblem& prob, const Assignment& a) {
  require_dims(prob, a);
  const int N = prob.n_items, M = prob.n_symbols, K = a.n_codes;
  InducedQuantities iq = induced_quantities(prob, a);

  IbDistortion out;
  std::vector<double> px_i(M);
  for (int i = 0; i < N; ++i) {
    double pi = prob.item_prob(i);
    for (int x = 0; x < M; ++x) px_i[x] = prob.joint[static_cast<size_t>(i) * M + x] / pi;
    for (int z = 0; z < K; ++z) {
      double w = pi * a.cond[static_cast<size_t>(i) * K + z];
      if (w > 0.0) {
        bool hit_zero = false;
        double kl = kl_rows(px_i.data(), iq.px_given_z.data() + static_cast<size_t>(z) * M,
                            M, &hit_zero);
        if (hit_zero) {
          out.value = kInf;
          out.infinite = true;
          return out;
        }
        out.value += w * kl;
      }
    }
  }

  for (int z = 0; z < K; ++z) {
    if (iq.z_defined[z]) {
      out.h_x_given_z +=
          iq.pz[z] * entropy(iq.px_given_z.data() + static_cast<size_t>(z) * M, M);
    }
  }
  for (int i = 0; i < N; ++i) {
    double pi = prob.item_prob(i);
    double h = 0.0;
    for (int x = 0; x < M; ++x) {
      double v = prob.joint[static_cast<size_t>(i) * M + x] / pi;
      if (v > 0.0) h -= v * std::log(v);
    }
    out.h_x_given_i += pi * h;
  }
  return out;
}

double verify_reconstruction_bound(const DiscreteIBProblem& prob, const Assignment& a,
                                   const std::vector<double>& q) {
  require_dims(prob, a);
  const int M = prob.n_symbols, K = a.n_codes;
  if (q.size() != static_cast<size_t>(K) * M) {
    throw std::invalid_argument("q size does not match K x M");
  }
  InducedQuantities iq = induced_quantities(prob, a);

  double exact = 0.0, variational = 0.0;
  for (int z = 0; z < K; ++z) {
    if (!iq.z_defined[z]) continue;
    const double* pz_row = iq.px_given_z.data() + static_cast<size_t>(z) * M;
    for (int x = 0; x < M; ++x) {
      if (pz_row[x] > 0.0) {
        exact -= iq.pz[z] * pz_row[x] * std::log(pz_row[x]);
        double qv = q[static_cast<size_t>(z) * M + x];
        if (qv <= 0.0) return kInf;
        variational -= iq.pz[z] * pz_row[x] * std::log(qv);
      }
    }
  }
  return variational - exact;
}

double verify_marginal_bound(const DiscreteIBProblem& prob, const Assignment& a,
                             const Marginal& r) {
  require_dims(prob, a);
  const int N = prob.n_items, K = a.n_codes;
  if (static_cast<int>(r.r.size()) != K) {
    throw std::invalid_argument("marginal size does not match K");
  }
  InducedQuantities iq = induced_quantities(prob, a);

  double kl = 0.0;
  for (int i = 0; i < N; ++i) {
    double pi = prob.item_prob(i);
    bool hit_zero = false;
    double row = kl_rows(a.cond.data() + static_cast<size_t>(i) * K, r.r.data(), K, &hit_zero);
    if (hit_zero) return kInf;
    kl += pi * row;
  }
  return kl - iq.mutual_information;
}

double verify_entropy_bound(const DiscreteIBProblem& prob, const Assignment& a,
                            const Marginal& r) {
  require_dims(prob, a);
  const int N = prob.n_items, K = a.n_codes;
  if (static_cast<int>(r.r.size()) != K) {
    throw std::invalid_argument("marginal size does not match K");
  }
  InducedQuantities iq = induced_quantities(prob, a);

  // Cross entropy via the p(i)-weighted route of the derivation, kept
  // separate from the H(Z) computation it is compared against.
  double cross = 0.0;
  for (int i = 0; i < N; ++i) {
    double pi = prob.item_prob(i);
    for (int z = 0; z < K; ++z) {
      double c = a.cond[static_cast<size_t>(i) * K + z];
      if (c > 0.0) {
        if (r.r[z] <= 0.0) return kInf;
        cross -= pi * c * std::log(r.r[z]);
      }
    }
  }
  return cross - iq.entropy_z;
}

KlDecomposition kl_decomposition_check(const DiscreteIBProblem& prob, const Assignment& a,
                                       const Marginal& r) {
  require_dims(prob, a);
  const int N = prob.n_items, K = a.n_codes;
  if (static_cast<int>(r.r.size()) != K) {
    throw std::invalid_argument("marginal size does not match K");
  }
  KlDecomposition out;
  for (int i = 0; i < N; ++i) {
    double pi = prob.item_prob(i);
    const double* row = a.cond.data() + static_cast<size_t>(i) * K;
    bool hit_zero = false;
    double row_kl = kl_rows(row, r.r.data(), K, &hit_zero);
    out.kl += hit_zero ? kInf : pi * row_kl;
    for (int z = 0; z < K; ++z) {
      if (row[z] > 0.0) {
        if (r.r[z] > 0.0) {
          out.cross_entropy -= pi * row[z] * std::log(r.r[z]);
        } else {
          out.cross_entropy = kInf;
        }
        out.cond_entropy -= pi * row[z] * std::log(row[z]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exhaustive DIB search

double dib_objective(const DiscreteIBProblem& prob, const std::vector<int>& code_of_item,
                     int n_codes, double beta) {
  const int N = prob.n_items, M = prob.n_symbols;
  if (static_cast<int>(code_of_item.size()) != N) {
    throw std::invalid_argument("assignment length does not match problem items");
  }

  std::vector<double> pi(N);
  for (int i = 0; i < N; ++i) pi[i] = prob.item_prob(i);

  std::vector<double> pz(n_codes, 0.0);
  std::vector<double> pxz(static_cast<size_t>(n_codes) * M, 0.0);  // p(x,z)
  for (int i = 0; i < N; ++i) {
    int z = code_of_item[i];
    if (z < 0 || z >= n_codes) throw std::invalid_argument("code index out of range");
    pz[z] += pi[i];
    for (int x = 0; x < M; ++x) {
      pxz[static_cast<size_t>(z) * M + x] += prob.joint[static_cast<size_t>(i) * M + x];
    }
  }

  // d_IB directly: for a bijection p(x|z) reproduces p(x|i) bit for bit,
  // so the log-ratio terms vanish exactly and ties stay exact.
  double distortion = 0.0;
  for (int i = 0; i < N; ++i) {
    int z = code_of_item[i];
    for (int x = 0; x < M; ++x) {
      double p = prob.joint[static_cast<size_t>(i) * M + x] / pi[i];
      if (p > 0.0) {
        double q = pxz[static_cast<size_t>(z) * M + x] / pz[z];
        distortion += pi[i] * p * std::log(p / q);
      }
    }
  }
  return distortion + beta * entropy(pz);
}

DibSearchResult exhaustive_dib_search(const DiscreteIBProblem& prob, int n_codes,
                                      double beta) {
  if (n_codes < 1) throw std::invalid_argument("n_codes must be positive");
  const int N = prob.n_items;
  double combos = 1.0;
  for (int i = 0; i < N; ++i) {
    combos *= n_codes;
    if (combos > 1e6) {
      throw std::invalid_argument(
          "exhaustive_dib_search: K^N exceeds 10^6; use a smaller instance");
    }
  }

  std::vector<int> current(N, 0);
  DibSearchResult best;
  best.assignment = current;
  best.objective = dib_objective(prob, current, n_codes, beta);

  // Odometer enumeration visits vectors in lexicographic order (leftmost
  // digit most significant); strict improvement keeps the first minimum.
  while (true) {
    int pos = N - 1;
    while (pos >= 0 && current[pos] == n_codes - 1) {
      current[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++current[pos];
    double obj = dib_objective(prob, current, n_codes, beta);
    if (obj < best.objective) {
      best.objective = obj;
      best.assignment = current;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Randomized verification sweep

std::vector<BoundSweepRow> bound_sweep(int n_instances, std::uint64_t seed, int max_items,
                                       int max_symbols, int max_codes) {
  if (n_instances < 1) throw std::invalid_argument("bound_sweep: n_instances must be >= 1");
  if (max_items < 2 || max_symbols < 2 || max_codes < 2) {
    throw std::invalid_argument("bound_sweep: dimension caps must be >= 2");
  }

  std::vector<BoundSweepRow> rows;
  rows.reserve(static_cast<size_t>(n_instances) * 8);
  for (int inst = 0; inst < n_instances; ++inst) {
    std::uint64_t instance_seed = seed + static_cast<std::uint64_t>(inst);
    SplitMix64 rng(instance_seed);
    int n = 2 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_items - 1));
    int m = 2 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_symbols - 1));
    int k = 2 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_codes - 1));

    DiscreteIBProblem prob = DiscreteIBProblem::random(n, m, rng);
    Assignment a = Assignment::random(n, k, rng);
    std::vector<double> q_rand;
    q_rand.reserve(static_cast<size_t>(k) * m);
    for (int z = 0; z < k; ++z) {
      Marginal row = Marginal::random(m, rng);
      q_rand.insert(q_rand.end(), row.r.begin(), row.r.end());
    }
    Marginal r_rand = Marginal::random(k, rng);

    InducedQuantities iq = induced_quantities(prob, a);
    std::vector<double> q_true = iq.px_given_z;
    for (int z = 0; z < k; ++z) {
      if (!iq.z_defined[z]) {
        for (int x = 0; x < m; ++x) q_true[static_cast<size_t>(z) * m + x] = 1.0 / m;
      }
    }
    std::vector<double> pz = iq.pz;
    double pz_total = 0.0;
    for (double v : pz) pz_total += v;
    for (double& v : pz) v /= pz_total;  // guard the 1e-12 marginal check
    Marginal r_true = Marginal::create(pz);

    rows.push_back({instance_seed, "recon_bound", verify_reconstruction_bound(prob, a, q_rand)});
    rows.push_back({instance_seed, "marginal_bound", verify_marginal_bound(prob, a, r_rand)});
    rows.push_back({instance_seed, "entropy_bound", verify_entropy_bound(prob, a, r_rand)});
    rows.push_back(
        {instance_seed, "recon_bound_eq", verify_reconstruction_bound(prob, a, q_true)});
    rows.push_back({instance_seed, "marginal_bound_eq", verify_marginal_bound(prob, a, r_true)});
    rows.push_back({instance_seed, "entropy_bound_eq", verify_entropy_bound(prob, a, r_true)});

    KlDecomposition kd = kl_decomposition_check(prob, a, r_rand);
    rows.push_back({instance_seed, "kl_identity",
                    std::abs(kd.kl - (kd.cross_entropy - kd.cond_entropy))});
    IbDistortion dist = ib_distortion(prob, a);
    rows.push_back({instance_seed, "dib_identity",
                    std::abs(dist.value - (dist.h_x_given_z - dist.h_x_given_i))});
  }
  return rows;
}

bool bound_sweep_passes(const std::vector<BoundSweepRow>& rows) {
  for (const auto& row : rows) {
    if (!std::isfinite(row.gap)) return false;
    bool eq_or_identity = row.bound_name.ends_with("_eq") || row.bound_name.ends_with("identity");
    if (eq_or_identity) {
      if (std::abs(row.gap) > 1e-10) return false;
    } else if (row.gap < -1e-12) {
      return false;
    }
  }
  return true;
}

}  // namespace vqib
