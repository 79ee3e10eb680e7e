#ifndef VQIB_TENSOR_HPP
#define VQIB_TENSOR_HPP

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vqib {

class Tape;

namespace detail {

struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  Tape* tape = nullptr;  // tape that produced this node, null for leaves
};

void record(Tape* tape, std::function<void()> backward_fn);

// Shared kernels, also used by vq_bottleneck so that the diagnostic path
// and the tensor path produce identical doubles.
double sqdist(std::span<const double> a, std::span<const double> b);
void softmax_row(std::span<const double> in, std::span<double> out);

}  // namespace detail

// Dense 1-D/2-D tensor of doubles with value semantics on a shared node.
// Copying a Tensor aliases the underlying storage; ops return fresh nodes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(std::vector<int> shape, std::vector<double> data);
  static Tensor parameter(std::vector<int> shape, std::vector<double> data);
  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int size() const;
  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only

  std::span<const double> values() const;
  // Direct write access for optimizer/EM updates between steps; bypasses
  // the tape on purpose.
  std::span<double> values_mut();
  std::span<const double> row(int r) const;

  bool requires_grad() const;
  // Gradient buffer; allocated zero-filled on demand.
  std::span<const double> grad() const;
  void zero_grad();
  double item() const;  // scalar tensors

 private:
  friend class Tape;
  friend Tensor add(const Tensor&, const Tensor&);
  friend Tensor add_rowvec(const Tensor&, const Tensor&);
  friend Tensor sub(const Tensor&, const Tensor&);
  friend Tensor mul(const Tensor&, const Tensor&);
  friend Tensor scale(const Tensor&, double);
  friend Tensor matmul(const Tensor&, const Tensor&);
  friend Tensor relu(const Tensor&);
  friend Tensor softmax_rows(const Tensor&);
  friend Tensor log(const Tensor&);
  friend Tensor sum(const Tensor&);
  friend Tensor mean(const Tensor&);
  friend Tensor sum_sqdiff(const Tensor&, const Tensor&);
  friend Tensor pairwise_sqdist(const Tensor&, const Tensor&);
  friend Tensor gather_rows(const Tensor&, const std::vector<int>&);
  friend Tensor stop_gradient(const Tensor&);
  friend Tensor straight_through(const Tensor&, std::vector<double>);

  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Records the backward closures of every op executed while active.
// Single-threaded per training run; one backward per recorded graph.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(loss)/d(loss) = 1 and replays recorded ops in reverse.
  // Parameter grads accumulate additively; they are zeroed by the
  // optimizer step, not here.
  void backward(const Tensor& loss);
  void reset();
  bool consumed() const { return consumed_; }

  static Tape* active();

 private:
  friend struct TapeScope;
  friend void detail::record(Tape*, std::function<void()>);
  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
};

// RAII activation: ops executed inside the scope record onto the tape.
struct TapeScope {
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Elementwise and matrix ops. Shape mismatches throw std::invalid_argument;
// a non-finite result throws std::runtime_error naming the op.
Tensor add(const Tensor& a, const Tensor& b);
// Broadcasts a length-n vector over the rows of an m-by-n matrix.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& a);
// Natural log; requires strictly positive inputs.
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum over all elements of (a - b)^2.
Tensor sum_sqdiff(const Tensor& a, const Tensor& b);
// D[i][j] = squared L2 distance between row i of a and row j of b.
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);
// out row i = a row idx[i]; backward scatters into the selected rows.
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
// Identity forward, zero gradient backward.
Tensor stop_gradient(const Tensor& a);
// Forward takes `values`, backward copies the output gradient to `a`
// unchanged. The quantizer is built on this.
Tensor straight_through(const Tensor& a, std::vector<double> values);

}  // namespace vqib

#endif
