#include "vqib/data_synth.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vqib {

namespace {

std::vector<double> draw_means(SplitMix64& rng, int components, int dim, double spread) {
  std::vector<double> means(static_cast<size_t>(components) * dim);
  for (double& v : means) v = rng.uniform(-spread, spread);
  return means;
}

void validate_mixture_params(int components, int dim, int n, double spread,
                             double noise_sigma) {
  if (components < 1) throw std::invalid_argument("gaussian_mixture: components must be >= 1");
  if (dim < 1) throw std::invalid_argument("gaussian_mixture: dim must be >= 1");
  if (n < components) throw std::invalid_argument("gaussian_mixture: n must be >= components");
  if (!(spread >= 0.0) || !std::isfinite(spread)) {
    throw std::invalid_argument("gaussian_mixture: spread must be finite and nonnegative");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("gaussian_mixture: noise_sigma must be finite and nonnegative");
  }
}

}  // namespace

std::vector<int> gaussian_mixture_counts(int components, int n) {
  std::vector<int> counts(components, n / components);
  for (int c = 0; c < n % components; ++c) counts[c] += 1;
  return counts;
}

std::vector<double> gaussian_mixture_means(std::uint64_t seed, int components, int dim,
                                           double spread) {
  SplitMix64 rng(seed);
  return draw_means(rng, components, dim, spread);
}

Dataset gaussian_mixture(std::uint64_t seed, int components, int dim, int n, double spread,
                         double noise_sigma) {
  validate_mixture_params(components, dim, n, spread, noise_sigma);
  SplitMix64 rng(seed);
  std::vector<double> means = draw_means(rng, components, dim, spread);
  std::vector<int> counts = gaussian_mixture_counts(components, n);

  Dataset out;
  out.n = n;
  out.dim = dim;
  out.rows.reserve(static_cast<size_t>(n) * dim);
  for (int c = 0; c < components; ++c) {
    for (int p = 0; p < counts[c]; ++p) {
      for (int d = 0; d < dim; ++d) {
        out.rows.push_back(means[static_cast<size_t>(c) * dim + d] +
                           noise_sigma * rng.normal());
      }
    }
  }
  std::ostringstream prov;
  prov << "gaussian_mixture seed=" << seed << " components=" << components << " dim=" << dim
       << " n=" << n << " spread=" << spread << " noise_sigma=" << noise_sigma;
  out.provenance = prov.str();
  return out;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (int d = 0; d < data.dim; ++d) out << (d ? ",f" : "f") << d;
  out << '\n';
  char buf[32];
  for (int i = 0; i < data.n; ++i) {
    for (int d = 0; d < data.dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", data.rows[static_cast<size_t>(i) * data.dim + d]);
      if (d) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);

  auto split = [](const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    return fields;
  };

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int dim = static_cast<int>(split(line).size());
  if (dim < 1) throw std::runtime_error(path + ": empty header");

  Dataset out;
  out.dim = dim;
  out.provenance = "csv " + path;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (static_cast<int>(fields.size()) != dim) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " fields, got " +
                               std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      const char* s = f.c_str();
      char* end = nullptr;
      double v = std::strtod(s, &end);
      if (end == s || *end != '\0' || !std::isfinite(v)) {
        throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                 ": invalid number '" + f + "'");
      }
      out.rows.push_back(v);
    }
    ++out.n;
  }
  if (out.n == 0) throw std::runtime_error(path + ": no data rows");
  return out;
}

}  // namespace vqib
