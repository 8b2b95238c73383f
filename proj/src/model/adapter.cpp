#include "cirlab/model/adapter.hpp"

#include "cirlab/error.hpp"

#include <algorithm>
#include <string>

namespace cirlab::model {

AdapterParams AdapterParams::identity_init(int width, int bottleneck, std::mt19937_64& rng) {
  if (bottleneck < 1 || bottleneck >= width) throw ContractViolation("adapter bottleneck must satisfy 1 <= c_b < c");
  std::normal_distribution<double> dist(0.0, 0.02);
  ad::Matrix down(bottleneck, width);
  for (ad::Index i = 0; i < down.size(); ++i) down.data()[i] = dist(rng);
  return {ad::Parameter(std::move(down)), ad::Parameter(ad::Matrix::Zero(width, bottleneck))};
}

int adapter_bottleneck(int width, int downsample_factor) { return std::max(1, width / std::max(1, downsample_factor)); }

Eigen::VectorXd adapter_apply(const Eigen::VectorXd& x, const AdapterParams& params) {
  if (x.size() != params.width() || params.up.rows() != params.width() || params.up.cols() != params.bottleneck()) {
    throw ContractViolation("adapter_apply: input length " + std::to_string(x.size()) + " does not match adapter width " +
                            std::to_string(params.width()));
  }
  const Eigen::VectorXd hidden = (params.down.value() * x).unaryExpr(&ad::gelu_value);
  return x + params.up.value() * hidden;
}

ad::Var adapter_apply_rows(const ad::Var& tokens, const AdapterParams& params) {
  if (tokens.cols() != params.width()) throw ContractViolation("adapter_apply_rows: token width does not match adapter");
  ad::Var hidden = ad::gelu(ad::matmul(tokens, ad::transpose(params.down)));
  return ad::add(tokens, ad::matmul(hidden, ad::transpose(params.up)));
}

ImageFeatureMap encode_image(const Image& image, const ImageEncoder& backbone, std::span<const AdapterParams> adapters) {
  if (!adapters.empty() && static_cast<int>(adapters.size()) != backbone.layer_count()) {
    throw ConfigError("adapter count " + std::to_string(adapters.size()) + " does not match backbone layer count " +
                      std::to_string(backbone.layer_count()));
  }
  ad::Var tokens = backbone.embed(image);
  for (int l = 0; l < backbone.layer_count(); ++l) {
    tokens = backbone.layer(l, tokens);
    if (!adapters.empty()) tokens = adapter_apply_rows(tokens, adapters[static_cast<std::size_t>(l)]);
  }
  return {tokens, backbone.grid_height(), backbone.grid_width()};
}

}  // namespace cirlab::model
