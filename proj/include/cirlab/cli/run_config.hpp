#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/model/config.hpp"
#include "cirlab/pipeline/driver.hpp"
#include "cirlab/training/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cirlab::cli {

inline constexpr int kConfigVersion = 1;

struct EvalSection {
  std::vector<std::string> categories;  ///< empty: every category present
  std::string gallery = "split_images";
  std::string gallery_manifest;
  int qualitative = 0;
  int workers = 1;
};

/// Everything one run needs. Missing sections and keys keep their defaults, so an empty
/// file describes the full-size model with the standard two-stage recipe.
struct RunConfig {
  int config_version = kConfigVersion;
  std::uint64_t seed = 0;
  model::ModelConfig model;
  training::StageConfig stage1 = training::StageConfig::defaults(training::Stage::stage1_pretrain);
  training::StageConfig stage2 = training::StageConfig::defaults(training::Stage::stage2_finetune);
  data::PipelineConfig pipeline;
  EvalSection eval;

  const training::StageConfig& stage(int number) const;
};

Json to_json(const RunConfig& config);
/// Strict parse with eager validation of every section. Relative paths in the pipeline
/// and eval sections are resolved against `base_dir`.
RunConfig run_config_from_json(const Json& json, const std::filesystem::path& base_dir = {});
/// Parse errors, unknown keys, broken invariants and version mismatches are ConfigErrors.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace cirlab::cli
