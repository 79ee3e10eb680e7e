// Shared test helpers: finite-difference oracles and plain-double reference
// implementations, kept independent of the tensor/tape code they check.
#ifndef VQIB_TESTS_SUPPORT_HPP
#define VQIB_TESTS_SUPPORT_HPP

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace vqib::test {

inline bool close_rel(double a, double b, double tol) {
  double denom = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * denom;
}

// Central differences of f with respect to every entry of buf; f must read
// buf on each call.
inline std::vector<double> central_diff(const std::function<double()>& f,
                                        std::span<double> buf, double eps) {
  std::vector<double> grad(buf.size());
  for (size_t i = 0; i < buf.size(); ++i) {
    double keep = buf[i];
    buf[i] = keep + eps;
    double fp = f();
    buf[i] = keep - eps;
    double fm = f();
    buf[i] = keep;
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

// Reference forward pass written with bare loops: relu on hidden layers,
// identity output. weights[l] is widths[l] x widths[l+1], biases[l] has
// widths[l+1] entries.
inline std::vector<double> plain_mlp_forward(const std::vector<int>& widths,
                                             const std::vector<std::vector<double>>& weights,
                                             const std::vector<std::vector<double>>& biases,
                                             const std::vector<double>& x, int batch) {
  std::vector<double> h = x;
  int in_dim = widths[0];
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    int out_dim = widths[l + 1];
    std::vector<double> next(static_cast<size_t>(batch) * out_dim, 0.0);
    for (int b = 0; b < batch; ++b) {
      for (int j = 0; j < out_dim; ++j) {
        double acc = biases[l][j];
        for (int i = 0; i < in_dim; ++i) {
          acc += h[static_cast<size_t>(b) * in_dim + i] *
                 weights[l][static_cast<size_t>(i) * out_dim + j];
        }
        if (l + 2 < widths.size() && acc < 0.0) acc = 0.0;
        next[static_cast<size_t>(b) * out_dim + j] = acc;
      }
    }
    h = std::move(next);
    in_dim = out_dim;
  }
  return h;
}

inline double plain_mse(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace vqib::test

#endif
