#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/pipeline/services.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace cirlab::data {

/// Options for the triplet-construction pipeline. Paths may be relative; the config
/// loader resolves them against the config file's directory.
struct PipelineConfig {
  std::string images;             ///< raw image pool manifest
  std::string validation_images;  ///< pool for the one-triplet-per-image evaluation split
  std::string holdout;            ///< manifest of ids that must never enter training triplets
  std::string prompts_dir;        ///< empty: prompts shipped with the project

  int embed_dims = 64;
  int embed_input_size = 16;
  int k = 20;
  double similarity_floor = 0.3;
  int caption_max_tokens = 128;
  int workers = 1;

  int max_attempts = 3;
  int retry_base_delay_ms = 200;

  int max_requests = 0;  ///< per service; 0 = unlimited
  int max_concurrent = 4;
  int min_interval_ms = 0;
  int timeout_s = 60;

  std::string base_url = "https://api.openai.com";
  std::string endpoint = "/v1/chat/completions";
  std::string caption_model = "internvl2-26b";
  std::string synthesis_model = "gpt-4o-mini";
  std::string api_key_env = "CIRLAB_API_KEY";

  void validate(const std::string& path = "pipeline") const;
};

Json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const Json& json, const std::string& path = "pipeline");

enum class PipelineStage { embed, pair, caption, synthesize, build, enhance, all };
PipelineStage parse_pipeline_stage(const std::string& text);
std::string to_string(PipelineStage stage);

struct PipelineClients {
  std::shared_ptr<ServiceClient> captioner;
  std::shared_ptr<ServiceClient> synthesizer;
};

/// Local deterministic mocks, or HTTP clients; both wrapped in the configured budget.
PipelineClients make_clients(const PipelineConfig& config, bool mock);

struct PipelineRun {
  PipelineConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  PipelineClients clients;
  Sleeper sleep;  ///< retry backoff; empty sleeps for real
};

struct PipelineOutcome {
  std::size_t failures = 0;  ///< annotation failures; the run still produced output
  std::vector<std::string> summary;

  bool partial() const { return failures > 0; }
};

/// Runs one stage, or all of them in order, inside run.out_dir:
///   embeddings.bin  pairs.jsonl  captions.jsonl  caption_failures.jsonl
///   modifications.jsonl  synthesis_failures.jsonl  dataset/
/// Each stage reads what the previous one wrote, so stages can be resumed or rerun singly.
/// `enhance` repeats the sequence for the validation pool under out_dir/enhanced.
PipelineOutcome run_pipeline(PipelineStage stage, const PipelineRun& run);

}  // namespace cirlab::data
