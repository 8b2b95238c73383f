#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a shared handle to a node holding a value and, once backward() has
// run, a gradient. Operations record their inputs and a backward closure only
// when gradient recording is enabled on the calling thread and at least one
// input requires a gradient, so inference under NoGradGuard allocates no tape.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cirlab::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  static Var scalar(double v) { return Var(Matrix::Constant(1, 1, v)); }

  const Matrix& value() const { return node_->value; }
  /// Gradient accumulated by backward(); a zero matrix of matching shape if none arrived.
  Matrix grad() const;

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  bool defined() const { return static_cast<bool>(node_); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Seeds d(self)/d(self) = 1 and propagates through the recorded tape. Self must be 1x1.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  friend class Parameter;
  std::shared_ptr<Node> node_;
};

/// A trainable leaf. Copies share the underlying node (parameter identity).
class Parameter {
 public:
  Parameter() = default;
  explicit Parameter(Matrix value);

  Var var() const { return var_; }
  operator Var() const { return var_; }  // NOLINT(google-explicit-constructor)

  const Matrix& value() const { return var_.value(); }
  Matrix& mutable_value() { return var_.node_->value; }
  Matrix grad() const { return var_.grad(); }
  void zero_grad();

  bool trainable() const { return var_.requires_grad(); }
  void set_trainable(bool on) { var_.node_->requires_grad = on; }

  Index rows() const { return var_.rows(); }
  Index cols() const { return var_.cols(); }
  bool same_as(const Parameter& other) const { return var_.node_ == other.var_.node_; }

 private:
  Var var_;
};

bool grad_enabled();

/// Disables tape recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

using BackwardFn = std::function<void(Node& self)>;

/// Builds a result node. `backward` receives the result node; its grad is populated and
/// it must push contributions into self.inputs[i]->accumulate(...). Inputs that do not
/// require gradients ignore accumulate() calls.
Var make_result(Matrix value, std::vector<Var> inputs, BackwardFn backward);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// a (r x c) plus a 1 x c row broadcast over every row.
Var add_row(const Var& a, const Var& row);
Var gelu(const Var& a);
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5);
/// Mean over rows: (r x c) -> (1 x c).
Var mean_rows(const Var& a);
Var sum(const Var& a);
Var slice_rows(const Var& a, Index start, Index count);
/// Gathers table rows by index; gradients scatter-add back into the table.
Var gather_rows(const Var& table, std::span<const Index> indices);
/// Arranges 1x1 scalars row-major into a rows x cols matrix.
Var stack_scalars(std::span<const Var> scalars, Index rows, Index cols);
/// Single-head scaled dot-product attention: softmax(q k^T / sqrt(d)) v.
Var attention(const Var& q, const Var& k, const Var& v);

double gelu_value(double x);

}  // namespace cirlab::ad
