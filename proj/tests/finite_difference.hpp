#pragma once

#include "cirlab/autograd.hpp"

#include <algorithm>
#include <functional>

namespace cirlab::testing {

/// Central differences of a scalar function with respect to every entry of `m`.
inline ad::Matrix numeric_gradient(ad::Matrix& m, const std::function<double()>& f, double step = 1e-5) {
  ad::Matrix g(m.rows(), m.cols());
  for (ad::Index i = 0; i < m.size(); ++i) {
    const double saved = m.data()[i];
    m.data()[i] = saved + step;
    const double up = f();
    m.data()[i] = saved - step;
    const double down = f();
    m.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), with a tiny floor for all-zero gradients.
inline double relative_error(const ad::Matrix& a, const ad::Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

}  // namespace cirlab::testing
