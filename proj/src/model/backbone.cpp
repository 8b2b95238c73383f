#include "cirlab/model/backbone.hpp"

#include "cirlab/archive.hpp"
#include "cirlab/error.hpp"
#include "cirlab/hashing.hpp"
#include "cirlab/image.hpp"

#include <cmath>
#include <random>

namespace cirlab::model {

namespace {

ad::Parameter gaussian(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return ad::Parameter(std::move(m));
}

}  // namespace

StandInBackbone::StandInBackbone(const BackboneConfig& config) : config_(config) {
  const int d = config.width;
  const int patch_dim = 3 * config.patch_size * config.patch_size;
  const int tokens = grid_height() * grid_width();
  std::mt19937_64 rng(config.seed);
  patch_embedding_ = gaussian(rng, patch_dim, d, 1.0 / std::sqrt(static_cast<double>(patch_dim)));
  position_embedding_ = gaussian(rng, tokens, d, 0.1);
  const double s = 0.5 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config.layers; ++l) {
    blocks_.push_back({gaussian(rng, d, d, s), gaussian(rng, d, d, s), gaussian(rng, d, d, s), gaussian(rng, d, d, s),
                       gaussian(rng, d, 2 * d, s), gaussian(rng, 2 * d, d, s / std::sqrt(2.0))});
  }
  for (auto& p : parameters()) p.param.set_trainable(false);
}

std::shared_ptr<StandInBackbone> StandInBackbone::load(const std::filesystem::path& path, const BackboneConfig& config) {
  auto backbone = std::make_shared<StandInBackbone>(config);
  const Archive archive = read_archive(path);
  for (auto& [name, param] : backbone->parameters()) {
    const ad::Matrix& value = archive.at(name);
    if (value.rows() != param.rows() || value.cols() != param.cols())
      throw DataError("backbone weights '" + name + "' have the wrong shape in " + path.string());
    param.mutable_value() = value;
  }
  return backbone;
}

void StandInBackbone::save(const std::filesystem::path& path) const {
  Archive archive;
  archive.metadata["kind"] = "standin_backbone";
  for (const auto& [name, param] : parameters()) archive.tensors.push_back({name, param.value()});
  write_archive(path, archive);
}

ad::Var StandInBackbone::embed(const Image& image) const {
  if (image.height != config_.image_size || image.width != config_.image_size)
    throw ContractViolation("backbone expects a " + std::to_string(config_.image_size) + "px square image");
  const int p = config_.patch_size;
  const int gh = grid_height();
  const int gw = grid_width();
  ad::Matrix patches(gh * gw, 3 * p * p);
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      int k = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < 3; ++c) patches(gy * gw + gx, k++) = image.at(gy * p + y, gx * p + x, c) - 0.5;
    }
  return ad::add(ad::matmul(ad::Var(std::move(patches)), patch_embedding_), position_embedding_);
}

ad::Var StandInBackbone::layer(int index, const ad::Var& tokens) const {
  const Block& b = blocks_.at(static_cast<std::size_t>(index));
  ad::Var attended = ad::attention(ad::matmul(tokens, b.query), ad::matmul(tokens, b.key), ad::matmul(tokens, b.value));
  ad::Var x = ad::add(tokens, ad::matmul(attended, b.output));
  return ad::add(x, ad::matmul(ad::gelu(ad::matmul(x, b.mlp_in)), b.mlp_out));
}

std::vector<NamedParameter> StandInBackbone::parameters() const {
  std::vector<NamedParameter> out{{"backbone.patch_embedding", patch_embedding_},
                                  {"backbone.position_embedding", position_embedding_}};
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string prefix = "backbone.layer" + std::to_string(l) + ".";
    const Block& b = blocks_[l];
    out.push_back({prefix + "query", b.query});
    out.push_back({prefix + "key", b.key});
    out.push_back({prefix + "value", b.value});
    out.push_back({prefix + "output", b.output});
    out.push_back({prefix + "mlp_in", b.mlp_in});
    out.push_back({prefix + "mlp_out", b.mlp_out});
  }
  return out;
}

std::string StandInBackbone::fingerprint() const {
  Sha256 h;
  h.update("standin:" + std::to_string(config_.layers) + ":" + std::to_string(config_.width) + ":" +
           std::to_string(config_.image_size) + ":" + std::to_string(config_.patch_size));
  for (const auto& [name, param] : parameters()) {
    h.update(name);
    h.update(std::span<const double>(param.value().data(), static_cast<std::size_t>(param.value().size())));
  }
  return h.hex_digest();
}

std::shared_ptr<ImageEncoder> make_backbone(const BackboneConfig& config) {
  if (!config.weights.empty()) return StandInBackbone::load(config.weights, config);
  return std::make_shared<StandInBackbone>(config);
}

}  // namespace cirlab::model
