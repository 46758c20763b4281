#pragma once

#include "imface/diffcore/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace imface::diff {

class Var;

/// Backward rule of one operation. Receives the node's own output (so rules
/// like exp/sqrt can reuse it), the incoming adjoint, and a mask of which
/// parents need a gradient. Rules are written with differentiable ops, so
/// running them with graph recording enabled yields higher-order derivatives.
using BackwardFn =
    std::function<std::vector<Var>(const Var& out, const Var& grad, const std::vector<bool>& need)>;

struct Node {
  Tensor value;
  std::vector<Var> parents;
  BackwardFn backward;
  bool requires_grad = false;
  const char* op = "leaf";
};

/// Handle to a node in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  // Only for optimizers and loaders: mutating a value invalidates any graph
  // built on top of it.
  Tensor& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Node* node() const { return node_.get(); }
  const char* op() const { return node_->op; }

  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const { return node_->value.item(); }

  /// A new leaf holding the same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new operations record graph edges. Thread-local.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward, const char* op);

inline Var constant(Tensor value) { return Var(std::move(value), false); }
inline Var parameter(Tensor value) { return Var(std::move(value), true); }

// Elementwise binary ops broadcast along any axis of extent 1.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var neg(const Var& a);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double c);
Var sin(const Var& a, double freq = 1.0);  // sin(freq * a)
Var cos(const Var& a, double freq = 1.0);  // cos(freq * a)
Var exp(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var relu(const Var& a);

/// op(a) * op(b), where op transposes when the flag is set.
Var matmul(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);

Var sum(const Var& a);  // -> 1x1
Var mean(const Var& a);
Var sum_to(const Var& a, std::size_t rows, std::size_t cols);
Var broadcast_to(const Var& a, std::size_t rows, std::size_t cols);
Var sum_rows(const Var& a);  // r x c -> 1 x c
Var sum_cols(const Var& a);  // r x c -> r x 1
Var reshape(const Var& a, std::size_t rows, std::size_t cols);

Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var pad_cols(const Var& a, std::size_t begin, std::size_t total);
Var pad_rows(const Var& a, std::size_t begin, std::size_t total);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

/// mask ? a : b with a constant 0/1 mask of the output shape.
Var where(const Tensor& mask, const Var& a, const Var& b);

/// Row-wise softmax, stabilized by subtracting the (constant) row maximum.
Var softmax_rows(const Var& a);
/// Euclidean norm of each row: r x c -> r x 1.
Var row_norm(const Var& a);
/// Row-wise dot product: r x c, r x c -> r x 1.
Var row_dot(const Var& a, const Var& b);
/// Row-wise cross product of r x 3 operands; either side may be a single
/// row that broadcasts.
Var cross_rows(const Var& a, const Var& b);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }

/// Reverse-mode gradients of `output` with respect to `inputs`. `seed` is the
/// adjoint of `output` (ones when undefined). With `create_graph` the result
/// is itself differentiable; otherwise it is a set of constants. Inputs the
/// output does not depend on receive zeros.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, const Var& seed = Var(),
                      bool create_graph = false);

/// Number of nodes reachable from `v` (diagnostics and tests).
std::size_t graph_size(const Var& v);

/// Spatial gradient of a per-row scalar field `f` (r x 1) with respect to its
/// query points `p` (r x d). The result stays in the graph so losses built on
/// it can be differentiated again with respect to parameters.
Var input_gradient(const Var& f, const Var& p);

}  // namespace imface::diff
