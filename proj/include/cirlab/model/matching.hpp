#pragma once

#include "cirlab/autograd.hpp"

namespace cirlab::model {

/// Token mixing (n_t x n_q) and channel mixing (d_q x d_c). One instance serves both the
/// query and candidate branches.
struct MixerParams {
  ad::Parameter token_mixing;
  ad::Parameter channel_mixing;

  int n_q() const { return static_cast<int>(token_mixing.cols()); }
  int n_t() const { return static_cast<int>(token_mixing.rows()); }
  int d_q() const { return static_cast<int>(channel_mixing.rows()); }
  int d_c() const { return static_cast<int>(channel_mixing.cols()); }
};

/// Norms below this floor are clamped to it, so all-zero rows score 0 instead of NaN.
inline constexpr double kNormFloor = 1e-8;

/// W_tm x W_cm: token mixing first, then channel mixing of the token-mixed result.
ad::Var mix(const ad::Var& x, const MixerParams& params);

/// Sum over rows of cos(a_i, b_i). Both inputs must have identical shapes.
ad::Var multi_head_similarity(const ad::Var& a, const ad::Var& b);
double multi_head_similarity(const ad::Matrix& a, const ad::Matrix& b);

}  // namespace cirlab::model
