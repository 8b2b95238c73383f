#include "cirlab/pipeline/driver.hpp"

#include "cirlab/error.hpp"
#include "cirlab/pipeline/annotate.hpp"
#include "cirlab/pipeline/build.hpp"
#include "cirlab/pipeline/embedding.hpp"
#include "cirlab/pipeline/pairing.hpp"
#include "cirlab/strict_json.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <set>

namespace cirlab::data {

void PipelineConfig::validate(const std::string& path) const {
  auto positive = [&](int v, const char* key) {
    if (v < 1) throw ConfigError("must be positive", path + "." + key);
  };
  positive(embed_dims, "embed_dims");
  positive(embed_input_size, "embed_input_size");
  positive(k, "k");
  positive(caption_max_tokens, "caption_max_tokens");
  positive(workers, "workers");
  positive(max_attempts, "retry.max_attempts");
  positive(max_concurrent, "budget.max_concurrent");
  positive(timeout_s, "budget.timeout_s");
  if (retry_base_delay_ms < 0) throw ConfigError("must be non-negative", path + ".retry.base_delay_ms");
  if (max_requests < 0) throw ConfigError("must be non-negative", path + ".budget.max_requests");
  if (min_interval_ms < 0) throw ConfigError("must be non-negative", path + ".budget.min_interval_ms");
  if (similarity_floor < -1.0 || similarity_floor > 1.0) throw ConfigError("must lie in [-1, 1]", path + ".similarity_floor");
}

Json to_json(const PipelineConfig& c) {
  return Json{{"images", c.images},
              {"validation_images", c.validation_images},
              {"holdout", c.holdout},
              {"prompts_dir", c.prompts_dir},
              {"embed_dims", c.embed_dims},
              {"embed_input_size", c.embed_input_size},
              {"k", c.k},
              {"similarity_floor", c.similarity_floor},
              {"caption_max_tokens", c.caption_max_tokens},
              {"workers", c.workers},
              {"retry", {{"max_attempts", c.max_attempts}, {"base_delay_ms", c.retry_base_delay_ms}}},
              {"budget",
               {{"max_requests", c.max_requests},
                {"max_concurrent", c.max_concurrent},
                {"min_interval_ms", c.min_interval_ms},
                {"timeout_s", c.timeout_s}}},
              {"service",
               {{"base_url", c.base_url},
                {"endpoint", c.endpoint},
                {"caption_model", c.caption_model},
                {"synthesis_model", c.synthesis_model},
                {"api_key_env", c.api_key_env}}}};
}

PipelineConfig pipeline_config_from_json(const Json& json, const std::string& path) {
  PipelineConfig c;
  StrictReader r(json, path);
  r.read("images", c.images);
  r.read("validation_images", c.validation_images);
  r.read("holdout", c.holdout);
  r.read("prompts_dir", c.prompts_dir);
  r.read("embed_dims", c.embed_dims);
  r.read("embed_input_size", c.embed_input_size);
  r.read("k", c.k);
  r.read("similarity_floor", c.similarity_floor);
  r.read("caption_max_tokens", c.caption_max_tokens);
  r.read("workers", c.workers);
  const Json retry = r.child("retry");
  const Json budget = r.child("budget");
  const Json service = r.child("service");
  r.finish();

  StrictReader rr(retry, r.key_path("retry"));
  rr.read("max_attempts", c.max_attempts);
  rr.read("base_delay_ms", c.retry_base_delay_ms);
  rr.finish();
  StrictReader b(budget, r.key_path("budget"));
  b.read("max_requests", c.max_requests);
  b.read("max_concurrent", c.max_concurrent);
  b.read("min_interval_ms", c.min_interval_ms);
  b.read("timeout_s", c.timeout_s);
  b.finish();
  StrictReader s(service, r.key_path("service"));
  s.read("base_url", c.base_url);
  s.read("endpoint", c.endpoint);
  s.read("caption_model", c.caption_model);
  s.read("synthesis_model", c.synthesis_model);
  s.read("api_key_env", c.api_key_env);
  s.finish();

  c.validate(path);
  return c;
}

PipelineStage parse_pipeline_stage(const std::string& text) {
  for (auto stage : {PipelineStage::embed, PipelineStage::pair, PipelineStage::caption, PipelineStage::synthesize,
                     PipelineStage::build, PipelineStage::enhance, PipelineStage::all})
    if (to_string(stage) == text) return stage;
  throw ConfigError("unknown pipeline stage '" + text + "' (embed, pair, caption, synthesize, build, enhance, all)");
}

std::string to_string(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::embed: return "embed";
    case PipelineStage::pair: return "pair";
    case PipelineStage::caption: return "caption";
    case PipelineStage::synthesize: return "synthesize";
    case PipelineStage::build: return "build";
    case PipelineStage::enhance: return "enhance";
    case PipelineStage::all: return "all";
  }
  return "all";
}

PipelineClients make_clients(const PipelineConfig& config, bool mock) {
  ServiceBudget budget;
  budget.max_requests = static_cast<std::size_t>(config.max_requests);
  budget.max_concurrent = static_cast<std::size_t>(config.max_concurrent);
  budget.min_interval = std::chrono::milliseconds(config.min_interval_ms);
  std::shared_ptr<ServiceClient> captioner, synthesizer;
  if (mock) {
    captioner = std::make_shared<MockCaptionClient>();
    synthesizer = std::make_shared<MockSynthesisClient>();
  } else {
    HttpServiceOptions http;
    http.base_url = config.base_url;
    http.path = config.endpoint;
    http.api_key_env = config.api_key_env;
    http.timeout = std::chrono::seconds(config.timeout_s);
    http.model = config.caption_model;
    captioner = std::make_shared<HttpChatClient>(http);
    http.model = config.synthesis_model;
    synthesizer = std::make_shared<HttpChatClient>(http);
  }
  return {std::make_shared<BudgetedClient>(captioner, budget), std::make_shared<BudgetedClient>(synthesizer, budget)};
}

namespace {

// One pool of images processed in one working directory.
struct Pool {
  std::filesystem::path manifest;
  std::filesystem::path dir;
  std::string id_prefix;
  std::set<std::string> holdout;
};

class Runner {
 public:
  explicit Runner(const PipelineRun& run) : run_(run) {
    options_.retry.max_attempts = run.config.max_attempts;
    options_.retry.base_delay = std::chrono::milliseconds(run.config.retry_base_delay_ms);
    options_.caption_max_tokens = run.config.caption_max_tokens;
    options_.workers = static_cast<std::size_t>(run.config.workers);
    options_.sleep = run.sleep;
  }

  void stage(PipelineStage s, const Pool& pool) {
    switch (s) {
      case PipelineStage::embed: return embed(pool);
      case PipelineStage::pair: return pair(pool);
      case PipelineStage::caption: return caption(pool);
      case PipelineStage::synthesize: return synthesize(pool);
      case PipelineStage::build: return build(pool);
      default: throw ContractViolation("Runner::stage: composite stage");
    }
  }

  void sequence(const Pool& pool) {
    for (auto s : {PipelineStage::embed, PipelineStage::pair, PipelineStage::caption, PipelineStage::synthesize,
                   PipelineStage::build})
      stage(s, pool);
  }

  PipelineOutcome outcome;

 private:
  std::vector<ImageRecord> images(const Pool& pool) const {
    if (pool.manifest.empty()) throw ConfigError("no image manifest configured", "pipeline.images");
    return read_image_manifest(pool.manifest);
  }

  PairingOptions pairing(const Pool& pool) const {
    PairingOptions o;
    o.k = run_.config.k;
    o.similarity_floor = run_.config.similarity_floor;
    o.seed = run_.seed;
    o.holdout = pool.holdout;
    return o;
  }

  const PromptLibrary& prompts() {
    if (!prompts_) {
      prompts_ = PromptLibrary::load(run_.config.prompts_dir.empty() ? default_prompt_dir()
                                                                     : std::filesystem::path(run_.config.prompts_dir));
    }
    return *prompts_;
  }

  void note(const Pool& pool, std::string line) {
    line = (pool.id_prefix == "e" ? "enhance/" : "") + line;
    spdlog::info("{}", line);
    outcome.summary.push_back(std::move(line));
  }

  void embed(const Pool& pool) {
    const auto records = images(pool);
    PixelProjectionEmbedder embedder(run_.config.embed_dims, 0, run_.config.embed_input_size);
    EmbeddingStore store = EmbeddingStore::load(pool.dir / "embeddings.bin");
    const auto s = compute_embeddings(records, embedder, store, static_cast<std::size_t>(run_.config.workers));
    std::filesystem::create_directories(pool.dir);
    store.save(pool.dir / "embeddings.bin");
    note(pool, fmt::format("embed: {} computed, {} reused, {} skipped", s.computed, s.reused, s.skipped.size()));
  }

  void pair(const Pool& pool) {
    const auto records = images(pool);
    PixelProjectionEmbedder embedder(run_.config.embed_dims, 0, run_.config.embed_input_size);
    const EmbeddingStore store = EmbeddingStore::load(pool.dir / "embeddings.bin");
    const auto pairs = pair_images(records, store.vectors(embedder.tag()), pairing(pool));
    check_pair_invariants(pairs, records, run_.config.k);
    write_pairs(pool.dir / "pairs.jsonl", pairs);
    std::size_t flagged = 0;
    for (const auto& p : pairs) flagged += p.below_similarity_floor ? 1 : 0;
    note(pool, fmt::format("pair: {} pairs from {} images, {} below the similarity floor", pairs.size(), records.size(),
                           flagged));
  }

  void caption(const Pool& pool) {
    const auto records = images(pool);
    const auto pairs = read_pairs(pool.dir / "pairs.jsonl");
    std::set<std::string> used;
    for (const auto& p : pairs) {
      used.insert(p.reference_id);
      used.insert(p.target_id);
    }
    std::vector<ImageRecord> todo;
    for (const auto& r : records)
      if (used.contains(r.id)) todo.push_back(r);
    const auto report = run_caption_stage(todo, *run_.clients.captioner, prompts(), options_,
                                          pool.dir / "captions.jsonl", pool.dir / "caption_failures.jsonl");
    outcome.failures += report.failures.size();
    note(pool, fmt::format("caption: {} new, {} reused, {} failed", report.completed, report.reused,
                           report.failures.size()));
  }

  void synthesize(const Pool& pool) {
    const auto pairs = read_pairs(pool.dir / "pairs.jsonl");
    const auto captions = read_captions(pool.dir / "captions.jsonl");
    const auto report = run_synthesis_stage(pairs, captions, *run_.clients.synthesizer, prompts(), options_,
                                            pool.dir / "modifications.jsonl", pool.dir / "synthesis_failures.jsonl");
    outcome.failures += report.failures.size();
    note(pool, fmt::format("synthesize: {} new, {} reused, {} failed", report.completed, report.reused,
                           report.failures.size()));
  }

  void build(const Pool& pool) {
    const auto records = images(pool);
    const auto result =
        build_dataset(records, read_pairs(pool.dir / "pairs.jsonl"), read_captions(pool.dir / "captions.jsonl"),
                      read_modifications(pool.dir / "modifications.jsonl"), pool.id_prefix, pool.holdout);
    write_dataset(pool.dir / "dataset", records, result);
    note(pool, fmt::format("build: {} triplets over {} images ({} no-change, {} incomplete excluded)",
                           result.stats.triplets, result.stats.unique_images, result.stats.excluded_no_change,
                           result.stats.excluded_incomplete));
  }

  const PipelineRun& run_;
  AnnotationOptions options_;
  std::optional<PromptLibrary> prompts_;
};

}  // namespace

PipelineOutcome run_pipeline(PipelineStage stage, const PipelineRun& run) {
  run.config.validate();
  if (!run.clients.captioner || !run.clients.synthesizer) throw ContractViolation("run_pipeline: clients not set");
  std::filesystem::create_directories(run.out_dir);

  Pool train{run.config.images, run.out_dir, "t", {}};
  if (!run.config.holdout.empty())
    for (const auto& r : read_image_manifest(run.config.holdout)) train.holdout.insert(r.id);
  Pool enhanced{run.config.validation_images, run.out_dir / "enhanced", "e", {}};

  Runner runner(run);
  if (stage == PipelineStage::all) {
    runner.sequence(train);
    if (!run.config.validation_images.empty()) runner.sequence(enhanced);
  } else if (stage == PipelineStage::enhance) {
    if (run.config.validation_images.empty())
      throw ConfigError("the enhance stage needs a validation image manifest", "pipeline.validation_images");
    runner.sequence(enhanced);
  } else {
    runner.stage(stage, train);
  }
  return runner.outcome;
}

}  // namespace cirlab::data
