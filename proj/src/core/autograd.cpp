#include "cirlab/autograd.hpp"

#include "cirlab/error.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <unordered_set>

namespace cirlab::ad {

namespace {

thread_local bool tls_grad_enabled = true;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw ContractViolation("item(): Var is not 1x1");
  return node_->value(0, 0);
}

void Var::backward() const {
  if (rows() != 1 || cols() != 1) throw ContractViolation("backward(): output must be 1x1");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
}

Parameter::Parameter(Matrix value) : var_(std::move(value), true) {}

void Parameter::zero_grad() { var_.node_->grad.resize(0, 0); }

bool grad_enabled() { return tls_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { tls_grad_enabled = previous_; }

Var make_result(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  Var out(std::move(value), false);
  if (!tls_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  Node& node = *out.node();
  node.requires_grad = true;
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.node());
  node.backward_fn = std::move(backward);
  return out;
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + ")");
  }
  return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& a = *self.inputs[0];
    Node& b = *self.inputs[1];
    if (a.requires_grad) a.accumulate(self.grad * b.value.transpose());
    if (b.requires_grad) b.accumulate(a.value.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  return make_result(a.value().transpose(), {a},
                     [](Node& self) { self.inputs[0]->accumulate(self.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(-self.grad);
  });
}

Var scale(const Var& a, double factor) {
  return make_result(a.value() * factor, {a},
                     [factor](Node& self) { self.inputs[0]->accumulate(self.grad * factor); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractViolation("add_row: row must be 1 x cols(a)");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
    self.inputs[1]->accumulate(self.grad.colwise().sum());
  });
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Var gelu(const Var& a) {
  return make_result(a.value().unaryExpr(&gelu_value), {a}, [](Node& self) {
    Node& in = *self.inputs[0];
    const Matrix d = in.value.unaryExpr([](double x) {
      const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + x * pdf;
    });
    in.accumulate(self.grad.cwiseProduct(d));
  });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return make_result(y, {a}, [y](Node& self) {
    Matrix gy = self.grad.cwiseProduct(y);
    const Eigen::VectorXd dots = gy.rowwise().sum();
    gy -= y.cwiseProduct(dots.replicate(1, y.cols()));
    self.inputs[0]->accumulate(gy);
  });
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias, double eps) {
  const Index cols = a.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw ContractViolation("layer_norm_rows: gain/bias must be 1 x cols(a)");
  }
  Matrix xhat(a.rows(), cols);
  Eigen::VectorXd inv_std(a.rows());
  for (Index r = 0; r < a.rows(); ++r) {
    const double mean = a.value().row(r).mean();
    const auto centered = (a.value().row(r).array() - mean).eval();
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {a, gain, bias}, [xhat, inv_std](Node& self) {
    Node& x = *self.inputs[0];
    Node& g = *self.inputs[1];
    Node& b = *self.inputs[2];
    if (x.requires_grad) {
      Matrix dxhat = self.grad.array().rowwise() * g.value.row(0).array();
      Matrix dx(dxhat.rows(), dxhat.cols());
      for (Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
        dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
      }
      x.accumulate(dx);
    }
    if (g.requires_grad) g.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (b.requires_grad) b.accumulate(self.grad.colwise().sum());
  });
}

Var mean_rows(const Var& a) {
  const Index rows = a.rows();
  return make_result(a.value().colwise().mean(), {a}, [rows](Node& self) {
    self.inputs[0]->accumulate(self.grad.replicate(rows, 1) / static_cast<double>(rows));
  });
}

Var sum(const Var& a) {
  const Index rows = a.rows();
  const Index cols = a.cols();
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {a}, [rows, cols](Node& self) {
    self.inputs[0]->accumulate(Matrix::Constant(rows, cols, self.grad(0, 0)));
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ContractViolation("slice_rows: out of range");
  const Index rows = a.rows();
  return make_result(a.value().middleRows(start, count), {a}, [start, count, rows](Node& self) {
    Matrix g = Matrix::Zero(rows, self.grad.cols());
    g.middleRows(start, count) = self.grad;
    self.inputs[0]->accumulate(g);
  });
}

Var gather_rows(const Var& table, std::span<const Index> indices) {
  Matrix out(static_cast<Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table.rows()) throw ContractViolation("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = table.value().row(indices[i]);
  }
  std::vector<Index> idx(indices.begin(), indices.end());
  return make_result(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    Node& t = *self.inputs[0];
    if (!t.requires_grad) return;
    // Sparse accumulation avoids materialising a dense table-sized gradient per call.
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) t.grad.row(idx[i]) += self.grad.row(static_cast<Index>(i));
  });
}

Var stack_scalars(std::span<const Var> scalars, Index rows, Index cols) {
  if (static_cast<Index>(scalars.size()) != rows * cols) throw ContractViolation("stack_scalars: count != rows*cols");
  Matrix out(rows, cols);
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  for (Index i = 0; i < rows * cols; ++i) out(i / cols, i % cols) = inputs[static_cast<std::size_t>(i)].item();
  return make_result(std::move(out), std::move(inputs), [cols](Node& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const auto k = static_cast<Index>(i);
      self.inputs[i]->accumulate(Matrix::Constant(1, 1, self.grad(k / cols, k % cols)));
    }
  });
}

Var attention(const Var& q, const Var& k, const Var& v) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) throw ContractViolation("attention: incompatible shapes");
  const double temperature = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return matmul(softmax_rows(scale(matmul(q, transpose(k)), temperature)), v);
}

}  // namespace cirlab::ad
