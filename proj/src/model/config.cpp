#include "cirlab/model/config.hpp"

#include "cirlab/error.hpp"
#include "cirlab/strict_json.hpp"

#include <algorithm>

namespace cirlab::model {

std::string to_string(MatchingMode mode) { return mode == MatchingMode::multi_head ? "multi_head" : "global_mean"; }

MatchingMode parse_matching_mode(const std::string& text) {
  if (text == "multi_head") return MatchingMode::multi_head;
  if (text == "global_mean") return MatchingMode::global_mean;
  throw ConfigError("expected 'multi_head' or 'global_mean', got '" + text + "'");
}

int ModelConfig::adapter_bottleneck() const { return std::max(1, backbone.width / std::max(1, downsample_factor)); }

void ModelConfig::validate(const std::string& path) const {
  auto key = [&](const char* k) { return path + "." + k; };
  auto positive = [&](int v, const char* k) {
    if (v <= 0) throw ConfigError("must be positive", key(k));
  };
  positive(n_q, "n_q");
  positive(d_q, "d_q");
  positive(n_t, "n_t");
  positive(d_c, "d_c");
  positive(downsample_factor, "downsample_factor");
  positive(text_max_tokens, "text_max_tokens");
  positive(fusion_layers, "fusion_layers");
  positive(text_buckets, "text_buckets");
  if (n_t >= n_q) throw ConfigError("token mixing must reduce tokens (n_t < n_q)", key("n_t"));
  if (d_c >= d_q) throw ConfigError("channel mixing must reduce channels (d_c < d_q)", key("d_c"));

  const std::string bb = path + ".backbone";
  if (backbone.layers <= 0) throw ConfigError("must be positive", bb + ".layers");
  if (backbone.width < 2) throw ConfigError("must be at least 2 (adapters need c_b < c)", bb + ".width");
  if (backbone.patch_size <= 0) throw ConfigError("must be positive", bb + ".patch_size");
  if (backbone.image_size <= 0 || backbone.image_size % backbone.patch_size != 0)
    throw ConfigError("must be a positive multiple of patch_size", bb + ".image_size");
  if (adapters_enabled && adapter_bottleneck() >= backbone.width)
    throw ConfigError("adapter bottleneck must be narrower than the layer width", key("downsample_factor"));
}

Json to_json(const ModelConfig& c) {
  Json backbone = {{"layers", c.backbone.layers},         {"width", c.backbone.width},
                   {"image_size", c.backbone.image_size}, {"patch_size", c.backbone.patch_size},
                   {"seed", c.backbone.seed},             {"weights", c.backbone.weights}};
  return Json{{"n_q", c.n_q},
              {"d_q", c.d_q},
              {"n_t", c.n_t},
              {"d_c", c.d_c},
              {"downsample_factor", c.downsample_factor},
              {"text_max_tokens", c.text_max_tokens},
              {"adapters_enabled", c.adapters_enabled},
              {"matching_mode", to_string(c.matching_mode)},
              {"fusion_layers", c.fusion_layers},
              {"text_buckets", c.text_buckets},
              {"backbone", backbone}};
}

ModelConfig model_config_from_json(const Json& json, const std::string& path) {
  ModelConfig c;
  StrictReader r(json, path);
  r.read("n_q", c.n_q);
  r.read("d_q", c.d_q);
  r.read("n_t", c.n_t);
  r.read("d_c", c.d_c);
  r.read("downsample_factor", c.downsample_factor);
  r.read("text_max_tokens", c.text_max_tokens);
  r.read("adapters_enabled", c.adapters_enabled);
  std::string mode = to_string(c.matching_mode);
  if (r.read("matching_mode", mode)) {
    try {
      c.matching_mode = parse_matching_mode(mode);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), r.key_path("matching_mode"));
    }
  }
  r.read("fusion_layers", c.fusion_layers);
  r.read("text_buckets", c.text_buckets);
  const Json backbone = r.child("backbone");
  r.finish();

  StrictReader b(backbone, r.key_path("backbone"));
  b.read("layers", c.backbone.layers);
  b.read("width", c.backbone.width);
  b.read("image_size", c.backbone.image_size);
  b.read("patch_size", c.backbone.patch_size);
  b.read("seed", c.backbone.seed);
  b.read("weights", c.backbone.weights);
  b.finish();

  c.validate(path);
  return c;
}

}  // namespace cirlab::model
