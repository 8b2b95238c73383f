#include "cirlab/autograd.hpp"
#include "cirlab/error.hpp"
#include "finite_difference.hpp"

#include <gtest/gtest.h>

#include <random>

namespace cirlab {
namespace {

using ad::Matrix;
using testing::numeric_gradient;
using testing::relative_error;

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

// Projects a matrix-valued op to a scalar with fixed random weights so every output
// entry contributes to the checked gradient.
struct Probe {
  Matrix weights;
  ad::Var operator()(const ad::Var& out) const {
    return ad::sum(ad::matmul(ad::matmul(ad::Var(Matrix::Ones(1, out.rows())), out), ad::Var(weights)));
  }
};

void expect_gradient_matches(ad::Parameter& p, const std::function<ad::Var()>& forward) {
  p.zero_grad();
  forward().backward();
  const Matrix analytic = p.grad();
  const Matrix numeric = numeric_gradient(p.mutable_value(), [&] {
    ad::NoGradGuard guard;
    return forward().item();
  });
  EXPECT_LT(relative_error(analytic, numeric), 1e-7);
}

TEST(Autograd, MatmulAddGeluGradients) {
  std::mt19937_64 rng(1);
  ad::Parameter a(random_matrix(3, 4, rng));
  ad::Parameter b(random_matrix(4, 2, rng));
  ad::Parameter row(random_matrix(1, 2, rng));
  Probe probe{random_matrix(2, 1, rng)};
  auto f = [&] { return probe(ad::gelu(ad::add_row(ad::matmul(a, b), row))); };
  expect_gradient_matches(a, f);
  expect_gradient_matches(b, f);
  expect_gradient_matches(row, f);
}

TEST(Autograd, SoftmaxLayerNormAttentionGradients) {
  std::mt19937_64 rng(2);
  ad::Parameter q(random_matrix(3, 4, rng));
  ad::Parameter kv(random_matrix(5, 4, rng));
  ad::Parameter gain(random_matrix(1, 4, rng));
  ad::Parameter bias(random_matrix(1, 4, rng));
  Probe probe{random_matrix(4, 1, rng)};
  auto f = [&] { return probe(ad::attention(ad::layer_norm_rows(q, gain, bias), kv, ad::scale(kv, 0.5))); };
  expect_gradient_matches(q, f);
  expect_gradient_matches(kv, f);
  expect_gradient_matches(gain, f);
  expect_gradient_matches(bias, f);
}

TEST(Autograd, GatherSliceMeanTransposeGradients) {
  std::mt19937_64 rng(3);
  ad::Parameter table(random_matrix(6, 3, rng));
  const std::vector<ad::Index> ids{4, 1, 4, 0};
  Probe probe{random_matrix(4, 1, rng)};
  auto f = [&] {
    ad::Var g = ad::gather_rows(table, ids);
    ad::Var m = ad::mean_rows(ad::slice_rows(table, 1, 3));
    return ad::add(probe(ad::transpose(g)), ad::sum(ad::sub(m, ad::scale(m, 3.0))));
  };
  expect_gradient_matches(table, f);
}

TEST(Autograd, StackScalarsRoutesGradients) {
  ad::Parameter x(Matrix::Constant(1, 1, 2.0));
  ad::Parameter y(Matrix::Constant(1, 1, -1.0));
  std::vector<ad::Var> entries{x, y, ad::scale(x, 3.0), y};
  ad::Var s = ad::sum(ad::stack_scalars(entries, 2, 2));
  s.backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.grad()(0, 0), 2.0);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  ad::Parameter p(Matrix::Ones(2, 2));
  ad::Var out;
  {
    ad::NoGradGuard guard;
    out = ad::sum(ad::matmul(p, p));
  }
  EXPECT_FALSE(out.requires_grad());
  EXPECT_TRUE(out.node()->inputs.empty());
}

TEST(Autograd, ShapeErrorsAreContractViolations) {
  ad::Var a(Matrix::Ones(2, 3));
  ad::Var b(Matrix::Ones(2, 3));
  EXPECT_THROW(ad::matmul(a, b), ContractViolation);
  EXPECT_THROW(ad::add(a, ad::Var(Matrix::Ones(3, 2))), ContractViolation);
  EXPECT_THROW(a.backward(), ContractViolation);
}

}  // namespace
}  // namespace cirlab
