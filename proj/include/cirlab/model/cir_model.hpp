#pragma once

#include "cirlab/autograd.hpp"
#include "cirlab/image.hpp"
#include "cirlab/model/adapter.hpp"
#include "cirlab/model/backbone.hpp"
#include "cirlab/model/config.hpp"
#include "cirlab/model/fusion.hpp"
#include "cirlab/model/matching.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace cirlab::model {

inline constexpr std::array<std::string_view, 4> kParameterGroups = {"backbone", "adapters", "fusion", "mixer"};

/// Composed image retrieval model: adapter-augmented encoder, query fusion and
/// multi-head (or global-mean) matching.
///
/// Parameters have reference identity, so the model is move-only. Forward methods do not
/// mutate state and may run concurrently; training must serialise weight updates.
class CirModel {
 public:
  CirModel(ModelConfig config, std::shared_ptr<const ImageEncoder> backbone, std::uint64_t init_seed);
  /// Builds the configured backbone and initialises trainable weights from `init_seed`.
  static CirModel create(const ModelConfig& config, std::uint64_t init_seed);

  CirModel(CirModel&&) noexcept = default;
  CirModel& operator=(CirModel&&) noexcept = default;
  CirModel(const CirModel&) = delete;
  CirModel& operator=(const CirModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const ImageEncoder& backbone() const { return *backbone_; }
  const QueryFusion& fusion() const { return fusion_; }
  const std::vector<AdapterParams>& adapters() const { return adapters_; }

  /// Both branches hold the same MixerParams object; null in global_mean mode.
  const std::shared_ptr<MixerParams>& query_mixer() const { return mixer_; }
  const std::shared_ptr<MixerParams>& candidate_mixer() const { return mixer_; }

  /// Resizes to the backbone's input size and runs the encoder with adapters.
  ImageFeatureMap encode_image(const Image& image) const;
  ad::Var fuse_query(const ImageFeatureMap& feature_map, std::string_view text) const;
  ad::Var encode_candidate(const ImageFeatureMap& feature_map) const;
  /// Text-only pathway of the fusion block, used for caption retrieval.
  ad::Var encode_text(std::string_view text) const;

  /// What gets compared: mix(x) in multi_head mode, the token mean in global_mean mode.
  ad::Var match_embedding(const ad::Var& tokens) const;
  ad::Var query_embedding(const Image& reference, std::string_view text) const;
  ad::Var candidate_embedding(const Image& candidate) const;
  ad::Var caption_embedding(std::string_view caption) const;

  ad::Var score(const Image& reference, std::string_view text, const Image& candidate) const;

  std::vector<NamedParameter> parameters(std::string_view group) const;
  std::vector<NamedParameter> all_parameters() const;

  /// SHA-256 over config and every parameter value.
  std::string fingerprint() const;

 private:
  ModelConfig config_;
  std::shared_ptr<const ImageEncoder> backbone_;
  std::vector<AdapterParams> adapters_;
  QueryFusion fusion_;
  std::shared_ptr<MixerParams> mixer_;
};

}  // namespace cirlab::model
