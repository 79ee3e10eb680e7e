#ifndef VQIB_DATA_SYNTH_HPP
#define VQIB_DATA_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "vqib/rng.hpp"

namespace vqib {

struct Dataset {
  int n = 0;
  int dim = 0;
  std::vector<double> rows;  // n*dim, row-major
  std::string provenance;    // generator name + seed + parameters, or file path
};

// Seeded Gaussian mixture. Component means are drawn uniformly from
// [-spread, spread]^dim; rows are laid out in component blocks, component c
// getting n/components points plus one of the remainder for c < n mod
// components. Every draw comes from one SplitMix64 stream, means first.
Dataset gaussian_mixture(std::uint64_t seed, int components, int dim, int n, double spread,
                         double noise_sigma);

// The means the generator above uses (components x dim, row-major).
std::vector<double> gaussian_mixture_means(std::uint64_t seed, int components, int dim,
                                           double spread);

// Points per component under the block layout.
std::vector<int> gaussian_mixture_counts(int components, int n);

// CSV with header "f0,f1,...", one row per line, 17 significant digits,
// LF endings. Parse errors carry the offending line number.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& data, const std::string& path);

}  // namespace vqib

#endif
