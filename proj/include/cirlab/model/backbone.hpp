#pragma once

#include "cirlab/autograd.hpp"
#include "cirlab/image.hpp"
#include "cirlab/model/config.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace cirlab::model {

struct NamedParameter {
  std::string name;
  ad::Parameter param;
};

/// Spatial grid of feature vectors. `data` holds one row per grid cell in row-major
/// (y * w + x) order, so it is an (h*w) x d_I view of the h x w x d_I tensor.
struct ImageFeatureMap {
  ad::Var data;
  int h = 0;
  int w = 0;

  int channels() const { return static_cast<int>(data.cols()); }
};

/// A layered image encoder with a hook point after every layer.
class ImageEncoder {
 public:
  virtual ~ImageEncoder() = default;

  virtual int layer_count() const = 0;
  virtual int width() const = 0;
  virtual int grid_height() const = 0;
  virtual int grid_width() const = 0;
  virtual int image_size() const = 0;

  /// Tokenises an image (already resized to image_size()) into (h*w) x width() tokens.
  virtual ad::Var embed(const Image& image) const = 0;
  virtual ad::Var layer(int index, const ad::Var& tokens) const = 0;

  virtual std::vector<NamedParameter> parameters() const = 0;
  /// Identifies the exact weights; checkpoints store this instead of the weights.
  virtual std::string fingerprint() const = 0;
};

/// Small deterministic transformer-style encoder: patch embedding plus `layers` blocks of
/// single-head self-attention and a GELU MLP, both residual.
class StandInBackbone final : public ImageEncoder {
 public:
  explicit StandInBackbone(const BackboneConfig& config);

  /// Loads weights for this architecture from an archive written by save().
  static std::shared_ptr<StandInBackbone> load(const std::filesystem::path& path, const BackboneConfig& config);
  void save(const std::filesystem::path& path) const;

  int layer_count() const override { return config_.layers; }
  int width() const override { return config_.width; }
  int grid_height() const override { return config_.image_size / config_.patch_size; }
  int grid_width() const override { return config_.image_size / config_.patch_size; }
  int image_size() const override { return config_.image_size; }

  ad::Var embed(const Image& image) const override;
  ad::Var layer(int index, const ad::Var& tokens) const override;

  std::vector<NamedParameter> parameters() const override;
  std::string fingerprint() const override;

 private:
  struct Block {
    ad::Parameter query, key, value, output, mlp_in, mlp_out;
  };

  BackboneConfig config_;
  ad::Parameter patch_embedding_;
  ad::Parameter position_embedding_;
  std::vector<Block> blocks_;
};

/// Builds the encoder described by `config`: the stand-in with seeded weights, or with
/// weights loaded from `config.weights` when set.
std::shared_ptr<ImageEncoder> make_backbone(const BackboneConfig& config);

}  // namespace cirlab::model
