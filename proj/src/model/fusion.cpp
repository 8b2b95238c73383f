#include "cirlab/model/fusion.hpp"

#include "cirlab/error.hpp"
#include "cirlab/seed.hpp"
#include "cirlab/text.hpp"

#include <cmath>

namespace cirlab::model {

namespace {

ad::Parameter gaussian(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return ad::Parameter(std::move(m));
}

ad::Parameter ones(int cols) { return ad::Parameter(ad::Matrix::Ones(1, cols)); }
ad::Parameter zeros(int cols) { return ad::Parameter(ad::Matrix::Zero(1, cols)); }

}  // namespace

std::vector<ad::Index> text_token_ids(std::string_view text, int buckets, int max_tokens) {
  std::vector<std::string> words = tokenize_words(text);
  if (words.empty()) throw ContractViolation("modification text is empty after normalisation");
  if (static_cast<int>(words.size()) > max_tokens) words.resize(static_cast<std::size_t>(max_tokens));
  std::vector<ad::Index> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(static_cast<ad::Index>(fnv1a64(w) % static_cast<std::uint64_t>(buckets)));
  return ids;
}

QueryFusion::QueryFusion(const ModelConfig& config, int image_width, std::mt19937_64& rng)
    : text_buckets_(config.text_buckets), text_max_tokens_(config.text_max_tokens) {
  const int d = config.d_q;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  queries_ = gaussian(rng, config.n_q, d, 1.0);
  image_projection_ = gaussian(rng, image_width, d, 1.0 / std::sqrt(static_cast<double>(image_width)));
  image_projection_bias_ = zeros(d);
  token_embedding_ = gaussian(rng, config.text_buckets, d, 1.0);
  position_embedding_ = gaussian(rng, config.text_max_tokens, d, 0.1);
  auto cross = [&] {
    return CrossAttention{ones(d), zeros(d), gaussian(rng, d, d, s), gaussian(rng, d, d, s), gaussian(rng, d, d, s),
                          gaussian(rng, d, d, s)};
  };
  for (int l = 0; l < config.fusion_layers; ++l) {
    Layer layer{cross(), cross(), ones(d), zeros(d), gaussian(rng, d, 2 * d, s),
                gaussian(rng, 2 * d, d, 1.0 / std::sqrt(2.0 * d))};
    layers_.push_back(std::move(layer));
  }
}

ad::Var QueryFusion::cross_attend(const ad::Var& queries, const ad::Var& context, const CrossAttention& block) const {
  ad::Var normed = ad::layer_norm_rows(queries, block.norm_gain, block.norm_bias);
  ad::Var attended =
      ad::attention(ad::matmul(normed, block.query), ad::matmul(context, block.key), ad::matmul(context, block.value));
  return ad::add(queries, ad::matmul(attended, block.output));
}

ad::Var QueryFusion::fuse(const ImageFeatureMap* image, std::optional<std::string_view> text) const {
  if (image == nullptr && !text) throw ContractViolation("fusion needs an image, a text, or both");

  ad::Var text_tokens;
  if (text) {
    const std::vector<ad::Index> ids = text_token_ids(*text, text_buckets_, text_max_tokens_);
    text_tokens = ad::add(ad::gather_rows(token_embedding_, ids),
                          ad::slice_rows(position_embedding_, 0, static_cast<ad::Index>(ids.size())));
  }
  ad::Var image_tokens;
  if (image != nullptr) {
    if (image->data.cols() != image_projection_.rows())
      throw ContractViolation("fusion: feature width does not match the image projection");
    image_tokens = ad::add_row(ad::matmul(image->data, image_projection_), image_projection_bias_);
  }

  ad::Var q = queries_;
  for (const Layer& layer : layers_) {
    if (text_tokens.defined()) q = cross_attend(q, text_tokens, layer.text);
    if (image_tokens.defined()) q = cross_attend(q, image_tokens, layer.image);
    ad::Var normed = ad::layer_norm_rows(q, layer.mlp_norm_gain, layer.mlp_norm_bias);
    q = ad::add(q, ad::matmul(ad::gelu(ad::matmul(normed, layer.mlp_in)), layer.mlp_out));
  }
  return q;
}

std::vector<NamedParameter> QueryFusion::parameters() const {
  std::vector<NamedParameter> out{{"fusion.queries", queries_},
                                  {"fusion.image_projection", image_projection_},
                                  {"fusion.image_projection_bias", image_projection_bias_},
                                  {"fusion.token_embedding", token_embedding_},
                                  {"fusion.position_embedding", position_embedding_}};
  auto add_cross = [&](const std::string& prefix, const CrossAttention& c) {
    out.push_back({prefix + "norm_gain", c.norm_gain});
    out.push_back({prefix + "norm_bias", c.norm_bias});
    out.push_back({prefix + "query", c.query});
    out.push_back({prefix + "key", c.key});
    out.push_back({prefix + "value", c.value});
    out.push_back({prefix + "output", c.output});
  };
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string prefix = "fusion.layer" + std::to_string(l) + ".";
    add_cross(prefix + "text.", layers_[l].text);
    add_cross(prefix + "image.", layers_[l].image);
    out.push_back({prefix + "mlp_norm_gain", layers_[l].mlp_norm_gain});
    out.push_back({prefix + "mlp_norm_bias", layers_[l].mlp_norm_bias});
    out.push_back({prefix + "mlp_in", layers_[l].mlp_in});
    out.push_back({prefix + "mlp_out", layers_[l].mlp_out});
  }
  return out;
}

ad::Var fuse_query(const ImageFeatureMap& feature_map, std::string_view modification_text, const QueryFusion& fusion) {
  return fusion.fuse(&feature_map, modification_text);
}

ad::Var encode_candidate(const ImageFeatureMap& feature_map, const QueryFusion& fusion) {
  return fusion.fuse(&feature_map, std::nullopt);
}

}  // namespace cirlab::model
