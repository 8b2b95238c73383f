#include "cirlab/model/cir_model.hpp"

#include "cirlab/error.hpp"
#include "cirlab/hashing.hpp"
#include "cirlab/seed.hpp"

#include <cmath>

namespace cirlab::model {

namespace {

QueryFusion make_fusion(const ModelConfig& config, const ImageEncoder& backbone, std::uint64_t seed) {
  auto rng = substream(seed, "init.fusion");
  return QueryFusion(config, backbone.width(), rng);
}

ad::Parameter gaussian(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return ad::Parameter(std::move(m));
}

}  // namespace

CirModel::CirModel(ModelConfig config, std::shared_ptr<const ImageEncoder> backbone, std::uint64_t init_seed)
    : config_(std::move(config)), backbone_(std::move(backbone)), fusion_(make_fusion(config_, *backbone_, init_seed)) {
  config_.validate();
  if (backbone_->width() != config_.backbone.width || backbone_->layer_count() != config_.backbone.layers)
    throw ConfigError("backbone does not match model.backbone geometry", "model.backbone");

  if (config_.adapters_enabled) {
    auto rng = substream(init_seed, "init.adapters");
    const int bottleneck = adapter_bottleneck(backbone_->width(), config_.downsample_factor);
    for (int l = 0; l < backbone_->layer_count(); ++l)
      adapters_.push_back(AdapterParams::identity_init(backbone_->width(), bottleneck, rng));
  }
  if (config_.matching_mode == MatchingMode::multi_head) {
    auto rng = substream(init_seed, "init.mixer");
    mixer_ = std::make_shared<MixerParams>();
    mixer_->token_mixing = gaussian(rng, config_.n_t, config_.n_q, 1.0 / std::sqrt(static_cast<double>(config_.n_q)));
    mixer_->channel_mixing = gaussian(rng, config_.d_q, config_.d_c, 1.0 / std::sqrt(static_cast<double>(config_.d_q)));
  }
}

CirModel CirModel::create(const ModelConfig& config, std::uint64_t init_seed) {
  config.validate();
  return CirModel(config, make_backbone(config.backbone), init_seed);
}

ImageFeatureMap CirModel::encode_image(const Image& image) const {
  const int size = backbone_->image_size();
  if (image.height == size && image.width == size) return model::encode_image(image, *backbone_, adapters_);
  return model::encode_image(resize_image(image, size), *backbone_, adapters_);
}

ad::Var CirModel::fuse_query(const ImageFeatureMap& feature_map, std::string_view text) const {
  return model::fuse_query(feature_map, text, fusion_);
}

ad::Var CirModel::encode_candidate(const ImageFeatureMap& feature_map) const {
  return model::encode_candidate(feature_map, fusion_);
}

ad::Var CirModel::encode_text(std::string_view text) const { return fusion_.fuse(nullptr, text); }

ad::Var CirModel::match_embedding(const ad::Var& tokens) const {
  if (mixer_) return mix(tokens, *mixer_);
  return ad::mean_rows(tokens);
}

ad::Var CirModel::query_embedding(const Image& reference, std::string_view text) const {
  return match_embedding(fuse_query(encode_image(reference), text));
}

ad::Var CirModel::candidate_embedding(const Image& candidate) const {
  return match_embedding(encode_candidate(encode_image(candidate)));
}

ad::Var CirModel::caption_embedding(std::string_view caption) const { return match_embedding(encode_text(caption)); }

ad::Var CirModel::score(const Image& reference, std::string_view text, const Image& candidate) const {
  return multi_head_similarity(query_embedding(reference, text), candidate_embedding(candidate));
}

std::vector<NamedParameter> CirModel::parameters(std::string_view group) const {
  if (group == "backbone") return backbone_->parameters();
  if (group == "adapters") {
    std::vector<NamedParameter> out;
    for (std::size_t i = 0; i < adapters_.size(); ++i) {
      out.push_back({"adapters." + std::to_string(i) + ".down", adapters_[i].down});
      out.push_back({"adapters." + std::to_string(i) + ".up", adapters_[i].up});
    }
    return out;
  }
  if (group == "fusion") return fusion_.parameters();
  if (group == "mixer") {
    if (!mixer_) return {};
    return {{"mixer.token_mixing", mixer_->token_mixing}, {"mixer.channel_mixing", mixer_->channel_mixing}};
  }
  throw ConfigError("unknown parameter group '" + std::string(group) + "'");
}

std::vector<NamedParameter> CirModel::all_parameters() const {
  std::vector<NamedParameter> out;
  for (auto group : kParameterGroups) {
    auto params = parameters(group);
    out.insert(out.end(), params.begin(), params.end());
  }
  return out;
}

std::string CirModel::fingerprint() const {
  Sha256 h;
  h.update(to_json(config_).dump());
  for (const auto& [name, param] : all_parameters()) {
    h.update(name);
    h.update(std::span<const double>(param.value().data(), static_cast<std::size_t>(param.value().size())));
  }
  return h.hex_digest();
}

}  // namespace cirlab::model
