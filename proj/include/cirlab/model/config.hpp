#pragma once

#include "cirlab/jsonl.hpp"

#include <cstdint>
#include <string>

namespace cirlab::model {

enum class MatchingMode { global_mean, multi_head };

std::string to_string(MatchingMode mode);
MatchingMode parse_matching_mode(const std::string& text);

/// Stand-in image encoder geometry. `weights` optionally names an archive holding
/// pretrained weights for the same architecture; otherwise weights derive from `seed`.
struct BackboneConfig {
  int layers = 2;
  int width = 64;
  int image_size = 16;
  int patch_size = 4;
  std::uint64_t seed = 1234;
  std::string weights;

  bool operator==(const BackboneConfig&) const = default;
};

struct ModelConfig {
  int n_q = 32;
  int d_q = 768;
  int n_t = 12;
  int d_c = 256;
  int downsample_factor = 16;
  int text_max_tokens = 128;
  bool adapters_enabled = true;
  MatchingMode matching_mode = MatchingMode::multi_head;
  int fusion_layers = 2;
  int text_buckets = 4096;
  BackboneConfig backbone;

  /// c_b = floor(width / downsample_factor), at least 1.
  int adapter_bottleneck() const;
  /// Throws ConfigError naming the key path ("model.n_t", ...) of the first violated invariant.
  void validate(const std::string& path = "model") const;

  bool operator==(const ModelConfig&) const = default;
};

Json to_json(const ModelConfig& config);
/// Strict: unknown keys are rejected. Missing keys keep their defaults. Validates.
ModelConfig model_config_from_json(const Json& json, const std::string& path = "model");

}  // namespace cirlab::model
