#pragma once

#include "cirlab/autograd.hpp"
#include "cirlab/model/backbone.hpp"

#include <random>
#include <span>

namespace cirlab::model {

/// Residual bottleneck: x + W_u GELU(W_d x), with W_d: c_b x c and W_u: c x c_b.
struct AdapterParams {
  ad::Parameter down;
  ad::Parameter up;

  int width() const { return static_cast<int>(down.cols()); }
  int bottleneck() const { return static_cast<int>(down.rows()); }

  /// W_u = 0 (identity at start), W_d ~ N(0, 0.02^2).
  static AdapterParams identity_init(int width, int bottleneck, std::mt19937_64& rng);
};

int adapter_bottleneck(int width, int downsample_factor);

Eigen::VectorXd adapter_apply(const Eigen::VectorXd& x, const AdapterParams& params);
/// Applies the adapter independently to every row of `tokens`.
ad::Var adapter_apply_rows(const ad::Var& tokens, const AdapterParams& params);

/// Runs the encoder with adapters[i] applied after layer i. `adapters` must be empty or
/// hold exactly one entry per encoder layer.
ImageFeatureMap encode_image(const Image& image, const ImageEncoder& backbone, std::span<const AdapterParams> adapters);

}  // namespace cirlab::model
