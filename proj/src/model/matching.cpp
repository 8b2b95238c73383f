#include "cirlab/model/matching.hpp"

#include "cirlab/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cirlab::model {

namespace {

constexpr double kFloorSquared = kNormFloor * kNormFloor;

void require_same_shape(const ad::Matrix& a, const ad::Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation("multi_head_similarity: shapes differ (" + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ")");
  }
}

// Per-row cosine terms. The denominator sqrt(|a|^2 |b|^2) makes cos(a, a) exactly 1
// in IEEE arithmetic, since sqrt(fl(s*s)) == s.
struct RowTerms {
  Eigen::VectorXd dot, norm_a2, norm_b2, denom;
};

RowTerms row_terms(const ad::Matrix& a, const ad::Matrix& b) {
  RowTerms t;
  t.dot = a.cwiseProduct(b).rowwise().sum();
  t.norm_a2 = a.rowwise().squaredNorm();
  t.norm_b2 = b.rowwise().squaredNorm();
  t.denom.resize(a.rows());
  for (ad::Index i = 0; i < a.rows(); ++i)
    t.denom(i) = std::sqrt(std::max(t.norm_a2(i), kFloorSquared) * std::max(t.norm_b2(i), kFloorSquared));
  return t;
}

}  // namespace

ad::Var mix(const ad::Var& x, const MixerParams& params) {
  if (x.rows() != params.n_q() || x.cols() != params.d_q()) {
    throw ContractViolation("mix: expected " + std::to_string(params.n_q()) + "x" + std::to_string(params.d_q()) +
                            " input, got " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }
  return ad::matmul(ad::matmul(params.token_mixing, x), params.channel_mixing);
}

double multi_head_similarity(const ad::Matrix& a, const ad::Matrix& b) {
  require_same_shape(a, b);
  const RowTerms t = row_terms(a, b);
  double total = 0.0;
  // Parallel rows can round one ulp past +-1; Cauchy-Schwarz says they cannot.
  for (ad::Index i = 0; i < a.rows(); ++i) total += std::clamp(t.dot(i) / t.denom(i), -1.0, 1.0);
  return total;
}

ad::Var multi_head_similarity(const ad::Var& a, const ad::Var& b) {
  require_same_shape(a.value(), b.value());
  const double value = multi_head_similarity(a.value(), b.value());
  return ad::make_result(ad::Matrix::Constant(1, 1, value), {a, b}, [](ad::Node& self) {
    ad::Node& na = *self.inputs[0];
    ad::Node& nb = *self.inputs[1];
    const ad::Matrix& av = na.value;
    const ad::Matrix& bv = nb.value;
    const RowTerms t = row_terms(av, bv);
    const double g = self.grad(0, 0);
    ad::Matrix ga(av.rows(), av.cols());
    ad::Matrix gb(bv.rows(), bv.cols());
    for (ad::Index i = 0; i < av.rows(); ++i) {
      const double cosine = t.dot(i) / t.denom(i);
      // Clamped norms are constants, so their rows only see the dot-product term.
      ga.row(i) = bv.row(i) / t.denom(i);
      gb.row(i) = av.row(i) / t.denom(i);
      if (t.norm_a2(i) > kFloorSquared) ga.row(i) -= cosine * av.row(i) / t.norm_a2(i);
      if (t.norm_b2(i) > kFloorSquared) gb.row(i) -= cosine * bv.row(i) / t.norm_b2(i);
    }
    if (na.requires_grad) na.accumulate(g * ga);
    if (nb.requires_grad) nb.accumulate(g * gb);
  });
}

}  // namespace cirlab::model
