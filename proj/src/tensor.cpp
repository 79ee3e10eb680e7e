#include "vqib/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vqib {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<detail::Node>;

int shape_size(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw std::invalid_argument("tensor rank must be 1 or 2");
  }
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string(what) + " produced a non-finite value");
    }
  }
}

std::vector<double>& ensure_grad(detail::Node& node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

NodePtr make_output(std::vector<int> shape, std::vector<double> value,
                    bool requires_grad, const char* op_name) {
  check_finite(value, op_name);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  Tape* tape = Tape::active();
  node->requires_grad = requires_grad && tape != nullptr;
  node->tape = node->requires_grad ? tape : nullptr;
  return node;
}

void require_defined(const Tensor& t, const char* op_name) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string(op_name) + ": undefined tensor");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op_name) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op_name) + ": shape mismatch");
  }
}

}  // namespace

namespace detail {

void record(Tape* tape, std::function<void()> backward_fn) {
  tape->ops_.push_back(std::move(backward_fn));
}

double sqdist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void softmax_row(std::span<const double> in, std::span<double> out) {
  double m = in[0];
  for (double x : in) m = std::max(m, x);
  double z = 0.0;
  for (size_t j = 0; j < in.size(); ++j) {
    out[j] = std::exp(in[j] - m);
    z += out[j];
  }
  for (size_t j = 0; j < in.size(); ++j) out[j] /= z;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::constant(std::vector<int> shape, std::vector<double> data) {
  int n = shape_size(shape);
  if (static_cast<int>(data.size()) != n) {
    throw std::invalid_argument("tensor data length does not match shape");
  }
  check_finite(data, "tensor creation");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(std::vector<int> shape, std::vector<double> data) {
  Tensor t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  int n = shape_size(shape);
  std::vector<double> data(n, 0.0);
  return requires_grad ? parameter(std::move(shape), std::move(data))
                       : constant(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

const std::vector<int>& Tensor::shape() const { return node_->shape; }

int Tensor::size() const { return static_cast<int>(node_->value.size()); }

int Tensor::rows() const {
  if (node_->shape.size() != 2) throw std::invalid_argument("rows(): tensor is not rank 2");
  return node_->shape[0];
}

int Tensor::cols() const {
  if (node_->shape.size() != 2) throw std::invalid_argument("cols(): tensor is not rank 2");
  return node_->shape[1];
}

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::values_mut() { return node_->value; }

std::span<const double> Tensor::row(int r) const {
  int c = cols();
  return std::span<const double>(node_->value).subspan(static_cast<size_t>(r) * c, c);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  ensure_grad(*node_);
  return node_->grad;
}

void Tensor::zero_grad() {
  ensure_grad(*node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor is not scalar");
  return node_->value[0];
}

// ---------------------------------------------------------------------------
// Tape

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw std::logic_error("backward already ran on this tape; call reset() first");
  }
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss");
  }
  if (loss.node_->tape != this) {
    throw std::invalid_argument("loss was not produced on this tape");
  }
  if (!std::isfinite(loss.item())) {
    throw std::runtime_error("backward: loss is not finite");
  }
  consumed_ = true;
  ensure_grad(*loss.node_)[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

void Tape::reset() {
  ops_.clear();
  consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

// ---------------------------------------------------------------------------
// Ops

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  NodePtr na = a.node_;
  NodePtr nb = b.node_;
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] + nb->value[i];
  NodePtr no = make_output(na->shape, std::move(out),
                           na->requires_grad || nb->requires_grad, "add");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nb, no] {
      const auto& g = no->grad;
      if (g.empty()) return;
      if (na->requires_grad) {
        auto& ga = ensure_grad(*na);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (nb->requires_grad) {
        auto& gb = ensure_grad(*nb);
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  require_defined(a, "add_rowvec");
  require_defined(v, "add_rowvec");
  int m = a.rows(), n = a.cols();
  if (v.shape().size() != 1 || v.size() != n) {
    throw std::invalid_argument("add_rowvec: vector length must equal matrix cols");
  }
  NodePtr na = a.node_;
  NodePtr nv = v.node_;
  std::vector<double> out(na->value.size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out[static_cast<size_t>(i) * n + j] =
          na->value[static_cast<size_t>(i) * n + j] + nv->value[j];
    }
  }
  NodePtr no = make_output(na->shape, std::move(out),
                           na->requires_grad || nv->requires_grad, "add_rowvec");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nv, no, m, n] {
      const auto& g = no->grad;
      if (g.empty()) return;
      if (na->requires_grad) {
        auto& ga = ensure_grad(*na);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (nv->requires_grad) {
        auto& gv = ensure_grad(*nv);
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) gv[j] += g[static_cast<size_t>(i) * n + j];
        }
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  NodePtr na = a.node_;
  NodePtr nb = b.node_;
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] - nb->value[i];
  NodePtr no = make_output(na->shape, std::move(out),
                           na->requires_grad || nb->requires_grad, "sub");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nb, no] {
      const auto& g = no->grad;
      if (g.empty()) return;
      if (na->requires_grad) {
        auto& ga = ensure_grad(*na);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (nb->requires_grad) {
        auto& gb = ensure_grad(*nb);
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  NodePtr na = a.node_;
  NodePtr nb = b.node_;
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] * nb->value[i];
  NodePtr no = make_output(na->shape, std::move(out),
                           na->requires_grad || nb->requires_grad, "mul");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nb, no] {
      const auto& g = no->grad;
      if (g.empty()) return;
      if (na->requires_grad) {
        auto& ga = ensure_grad(*na);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * nb->value[i];
      }
      if (nb->requires_grad) {
        auto& gb = ensure_grad(*nb);
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * na->value[i];
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor scale(const Tensor& a, double c) {
  require_defined(a, "scale");
  if (!std::isfinite(c)) throw std::invalid_argument("scale: factor must be finite");
  NodePtr na = a.node_;
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = c * na->value[i];
  NodePtr no = make_output(na->shape, std::move(out), na->requires_grad, "scale");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no, c] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
  }
  return Tensor(std::move(no));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  int m = a.rows(), k = a.cols();
  if (b.rows() != k) {
    throw std::invalid_argument("matmul: inner dimensions do not agree");
  }
  int n = b.cols();
  NodePtr na = a.node_;
  NodePtr nb = b.node_;
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      double av = na->value[static_cast<size_t>(i) * k + p];
      for (int j = 0; j < n; ++j) {
        out[static_cast<size_t>(i) * n + j] += av * nb->value[static_cast<size_t>(p) * n + j];
      }
    }
  }
  NodePtr no = make_output({m, n}, std::move(out),
                           na->requires_grad || nb->requires_grad, "matmul");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nb, no, m, k, n] {
      const auto& g = no->grad;
      if (g.empty()) return;
      if (na->requires_grad) {
        auto& ga = ensure_grad(*na);
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
              acc += g[static_cast<size_t>(i) * n + j] *
                     nb->value[static_cast<size_t>(p) * n + j];
            }
            ga[static_cast<size_t>(i) * k + p] += acc;
          }
        }
      }
      if (nb->requires_grad) {
        auto& gb = ensure_grad(*nb);
        for (int p = 0; p < k; ++p) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) {
              acc += na->value[static_cast<size_t>(i) * k + p] *
                     g[static_cast<size_t>(i) * n + j];
            }
            gb[static_cast<size_t>(p) * n + j] += acc;
          }
        }
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor relu(const Tensor& a) {
  require_defined(a, "relu");
  NodePtr na = a.node_;
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = na->value[i] > 0.0 ? na->value[i] : 0.0;
  NodePtr no = make_output(na->shape, std::move(out), na->requires_grad, "relu");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (size_t i = 0; i < g.size(); ++i) {
        if (na->value[i] > 0.0) ga[i] += g[i];
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor softmax_rows(const Tensor& a) {
  require_defined(a, "softmax_rows");
  int m = a.rows(), n = a.cols();
  NodePtr na = a.node_;
  std::vector<double> out(na->value.size());
  for (int i = 0; i < m; ++i) {
    std::span<const double> in(na->value.data() + static_cast<size_t>(i) * n, n);
    std::span<double> dst(out.data() + static_cast<size_t>(i) * n, n);
    detail::softmax_row(in, dst);
  }
  NodePtr no = make_output(na->shape, std::move(out), na->requires_grad, "softmax_rows");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no, m, n] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (int i = 0; i < m; ++i) {
        const double* y = no->value.data() + static_cast<size_t>(i) * n;
        const double* gy = g.data() + static_cast<size_t>(i) * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
        for (int j = 0; j < n; ++j) {
          ga[static_cast<size_t>(i) * n + j] += y[j] * (gy[j] - dot);
        }
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  NodePtr na = a.node_;
  std::vector<double> out(na->value.size());
  for (size_t i = 0; i < out.size(); ++i) {
    if (!(na->value[i] > 0.0)) {
      throw std::runtime_error("log: input must be strictly positive");
    }
    out[i] = std::log(na->value[i]);
  }
  NodePtr no = make_output(na->shape, std::move(out), na->requires_grad, "log");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / na->value[i];
    });
  }
  return Tensor(std::move(no));
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  NodePtr na = a.node_;
  double acc = 0.0;
  for (double x : na->value) acc += x;
  NodePtr no = make_output({1}, {acc}, na->requires_grad, "sum");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
    });
  }
  return Tensor(std::move(no));
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  NodePtr na = a.node_;
  double acc = 0.0;
  for (double x : na->value) acc += x;
  double inv = 1.0 / static_cast<double>(na->value.size());
  NodePtr no = make_output({1}, {acc * inv}, na->requires_grad, "mean");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no, inv] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * inv;
    });
  }
  return Tensor(std::move(no));
}

Tensor sum_sqdiff(const Tensor& a, const Tensor& b) {
  require_defined(a, "sum_sqdiff");
  require_defined(b, "sum_sqdiff");
  require_same_shape(a, b, "sum_sqdiff");
  NodePtr na = a.node_;
  NodePtr nb = b.node_;
  double acc = 0.0;
  for (size_t i = 0; i < na->value.size(); ++i) {
    double d = na->value[i] - nb->value[i];
    acc += d * d;
  }
  NodePtr no = make_output({1}, {acc}, na->requires_grad || nb->requires_grad,
                           "sum_sqdiff");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nb, no] {
      const auto& g = no->grad;
      if (g.empty()) return;
      double s = g[0];
      if (na->requires_grad) {
        auto& ga = ensure_grad(*na);
        for (size_t i = 0; i < ga.size(); ++i) {
          ga[i] += s * 2.0 * (na->value[i] - nb->value[i]);
        }
      }
      if (nb->requires_grad) {
        auto& gb = ensure_grad(*nb);
        for (size_t i = 0; i < gb.size(); ++i) {
          gb[i] += s * 2.0 * (nb->value[i] - na->value[i]);
        }
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
  require_defined(a, "pairwise_sqdist");
  require_defined(b, "pairwise_sqdist");
  int m = a.rows(), d = a.cols();
  if (b.cols() != d) {
    throw std::invalid_argument("pairwise_sqdist: row dimensions do not agree");
  }
  int k = b.rows();
  NodePtr na = a.node_;
  NodePtr nb = b.node_;
  std::vector<double> out(static_cast<size_t>(m) * k);
  for (int i = 0; i < m; ++i) {
    std::span<const double> ra(na->value.data() + static_cast<size_t>(i) * d, d);
    for (int j = 0; j < k; ++j) {
      std::span<const double> rb(nb->value.data() + static_cast<size_t>(j) * d, d);
      out[static_cast<size_t>(i) * k + j] = detail::sqdist(ra, rb);
    }
  }
  NodePtr no = make_output({m, k}, std::move(out),
                           na->requires_grad || nb->requires_grad, "pairwise_sqdist");
  if (no->requires_grad) {
    detail::record(no->tape, [na, nb, no, m, d, k] {
      const auto& g = no->grad;
      if (g.empty()) return;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
          double s = g[static_cast<size_t>(i) * k + j];
          if (s == 0.0) continue;
          const double* xa = na->value.data() + static_cast<size_t>(i) * d;
          const double* xb = nb->value.data() + static_cast<size_t>(j) * d;
          if (na->requires_grad) {
            auto& ga = ensure_grad(*na);
            for (int c = 0; c < d; ++c) {
              ga[static_cast<size_t>(i) * d + c] += s * 2.0 * (xa[c] - xb[c]);
            }
          }
          if (nb->requires_grad) {
            auto& gb = ensure_grad(*nb);
            for (int c = 0; c < d; ++c) {
              gb[static_cast<size_t>(j) * d + c] += s * 2.0 * (xb[c] - xa[c]);
            }
          }
        }
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  require_defined(a, "gather_rows");
  int k = a.rows(), d = a.cols();
  if (idx.empty()) throw std::invalid_argument("gather_rows: empty index list");
  for (int j : idx) {
    if (j < 0 || j >= k) throw std::invalid_argument("gather_rows: index out of range");
  }
  NodePtr na = a.node_;
  int m = static_cast<int>(idx.size());
  std::vector<double> out(static_cast<size_t>(m) * d);
  for (int i = 0; i < m; ++i) {
    const double* src = na->value.data() + static_cast<size_t>(idx[i]) * d;
    std::copy(src, src + d, out.begin() + static_cast<size_t>(i) * d);
  }
  NodePtr no = make_output({m, d}, std::move(out), na->requires_grad, "gather_rows");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no, idx, d, m] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (int i = 0; i < m; ++i) {
        for (int c = 0; c < d; ++c) {
          ga[static_cast<size_t>(idx[i]) * d + c] += g[static_cast<size_t>(i) * d + c];
        }
      }
    });
  }
  return Tensor(std::move(no));
}

Tensor stop_gradient(const Tensor& a) {
  require_defined(a, "stop_gradient");
  NodePtr na = a.node_;
  auto node = std::make_shared<detail::Node>();
  node->shape = na->shape;
  node->value = na->value;
  // requires_grad stays false: the backward pass never reaches through.
  return Tensor(std::move(node));
}

Tensor straight_through(const Tensor& a, std::vector<double> values) {
  require_defined(a, "straight_through");
  NodePtr na = a.node_;
  if (values.size() != na->value.size()) {
    throw std::invalid_argument("straight_through: value length mismatch");
  }
  NodePtr no = make_output(na->shape, std::move(values), na->requires_grad,
                           "straight_through");
  if (no->requires_grad) {
    detail::record(no->tape, [na, no] {
      const auto& g = no->grad;
      if (g.empty() || !na->requires_grad) return;
      auto& ga = ensure_grad(*na);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return Tensor(std::move(no));
}

}  // namespace vqib
