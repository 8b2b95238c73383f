#include "cirlab/cli/run_config.hpp"

#include "cirlab/error.hpp"
#include "cirlab/eval/evaluate.hpp"
#include "cirlab/strict_json.hpp"

#include <fstream>

namespace cirlab::cli {

const training::StageConfig& RunConfig::stage(int number) const {
  if (number == 1) return stage1;
  if (number == 2) return stage2;
  throw ConfigError("stage must be 1 or 2, got " + std::to_string(number), "--stage");
}

namespace {

Json to_json(const EvalSection& e) {
  return Json{{"categories", e.categories},
              {"gallery", e.gallery},
              {"gallery_manifest", e.gallery_manifest},
              {"qualitative", e.qualitative},
              {"workers", e.workers}};
}

EvalSection eval_from_json(const Json& json, const std::string& path) {
  EvalSection e;
  StrictReader r(json, path);
  r.read("categories", e.categories);
  r.read("gallery", e.gallery);
  r.read("gallery_manifest", e.gallery_manifest);
  r.read("qualitative", e.qualitative);
  r.read("workers", e.workers);
  r.finish();
  try {
    const auto mode = eval::parse_gallery_mode(e.gallery);
    if (mode == eval::GalleryMode::manifest && e.gallery_manifest.empty())
      throw ConfigError("gallery 'manifest' needs gallery_manifest", r.key_path("gallery_manifest"));
  } catch (const ConfigError& err) {
    if (!err.key_path().empty()) throw;
    throw ConfigError(err.what(), r.key_path("gallery"));
  }
  if (e.qualitative < 0) throw ConfigError("must be non-negative", r.key_path("qualitative"));
  if (e.workers < 1) throw ConfigError("must be positive", r.key_path("workers"));
  return e;
}

std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (base / path).lexically_normal().string();
}

}  // namespace

Json to_json(const RunConfig& c) {
  return Json{{"config_version", c.config_version},
              {"seed", c.seed},
              {"model", model::to_json(c.model)},
              {"stage1", training::to_json(c.stage1)},
              {"stage2", training::to_json(c.stage2)},
              {"pipeline", data::to_json(c.pipeline)},
              {"eval", to_json(c.eval)}};
}

RunConfig run_config_from_json(const Json& json, const std::filesystem::path& base_dir) {
  RunConfig c;
  StrictReader r(json, "");
  r.read("config_version", c.config_version);
  if (c.config_version != kConfigVersion) {
    throw ConfigError("this build reads version " + std::to_string(kConfigVersion) + ", the file declares " +
                          std::to_string(c.config_version) +
                          "; migrate as described in the README's configuration section (Versioning) and set "
                          "config_version to " + std::to_string(kConfigVersion),
                      "config_version");
  }
  r.read("seed", c.seed);
  const Json model = r.child("model");
  const Json stage1 = r.child("stage1");
  const Json stage2 = r.child("stage2");
  const Json pipeline = r.child("pipeline");
  const Json eval = r.child("eval");
  r.finish();

  c.model = model::model_config_from_json(model, "model");
  c.stage1 = training::stage_config_from_json(stage1, training::Stage::stage1_pretrain, "stage1");
  c.stage2 = training::stage_config_from_json(stage2, training::Stage::stage2_finetune, "stage2");
  c.pipeline = data::pipeline_config_from_json(pipeline, "pipeline");
  c.eval = eval_from_json(eval, "eval");
  c.stage1.seed = c.stage2.seed = c.seed;

  c.pipeline.images = resolve(c.pipeline.images, base_dir);
  c.pipeline.validation_images = resolve(c.pipeline.validation_images, base_dir);
  c.pipeline.holdout = resolve(c.pipeline.holdout, base_dir);
  c.pipeline.prompts_dir = resolve(c.pipeline.prompts_dir, base_dir);
  c.eval.gallery_manifest = resolve(c.eval.gallery_manifest, base_dir);
  c.model.backbone.weights = resolve(c.model.backbone.weights, base_dir);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json json;
  try {
    json = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(json, std::filesystem::absolute(path).parent_path());
}

}  // namespace cirlab::cli
