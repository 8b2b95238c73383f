#pragma once

#include "cirlab/autograd.hpp"
#include "cirlab/model/backbone.hpp"
#include "cirlab/model/config.hpp"

#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace cirlab::model {

/// Maps text to hashed vocabulary buckets, truncated to `max_tokens`.
/// Throws ContractViolation when no token survives normalisation.
std::vector<ad::Index> text_token_ids(std::string_view text, int buckets, int max_tokens);

/// Query-token fusion block in the role of a Q-Former: n_q learnable queries attend to
/// the text tokens (when text is given) and then to the projected image features, with a
/// GELU MLP after each pair of cross-attentions. All sublayers are pre-norm residual.
class QueryFusion {
 public:
  QueryFusion(const ModelConfig& config, int image_width, std::mt19937_64& rng);

  /// Either input may be absent, but not both. Absent branches are skipped entirely.
  ad::Var fuse(const ImageFeatureMap* image, std::optional<std::string_view> text) const;

  std::vector<NamedParameter> parameters() const;

 private:
  struct CrossAttention {
    ad::Parameter norm_gain, norm_bias, query, key, value, output;
  };
  struct Layer {
    CrossAttention text, image;
    ad::Parameter mlp_norm_gain, mlp_norm_bias, mlp_in, mlp_out;
  };

  ad::Var cross_attend(const ad::Var& queries, const ad::Var& context, const CrossAttention& block) const;

  int text_buckets_;
  int text_max_tokens_;
  ad::Parameter queries_;
  ad::Parameter image_projection_;
  ad::Parameter image_projection_bias_;
  ad::Parameter token_embedding_;
  ad::Parameter position_embedding_;
  std::vector<Layer> layers_;
};

/// n_q x d_q multimodal query embeddings. Empty text is a contract violation.
ad::Var fuse_query(const ImageFeatureMap& feature_map, std::string_view modification_text, const QueryFusion& fusion);
/// n_q x d_q candidate embeddings, text branch skipped.
ad::Var encode_candidate(const ImageFeatureMap& feature_map, const QueryFusion& fusion);

}  // namespace cirlab::model
