#include "cirlab/cli/app.hpp"

#include "cirlab/cli/run_config.hpp"
#include "cirlab/error.hpp"
#include "cirlab/eval/evaluate.hpp"
#include "cirlab/eval/quality.hpp"
#include "cirlab/model/checkpoint.hpp"
#include "cirlab/pipeline/driver.hpp"
#include "cirlab/pipeline/records.hpp"
#include "cirlab/training/dataset.hpp"
#include "cirlab/training/trainer.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <optional>

namespace cirlab::cli {

namespace {

namespace fs = std::filesystem;

// Routes spdlog to <run dir>/<name>.log and the error stream for the command's lifetime.
class RunLog {
 public:
  RunLog(const fs::path& dir, const std::string& name, std::ostream& err) : previous_(spdlog::default_logger()) {
    fs::create_directories(dir);
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((dir / (name + ".log")).string(), true);
    auto console = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    console->set_level(spdlog::level::warn);
    console->set_pattern("%l: %v");
    auto logger = std::make_shared<spdlog::logger>("cirlab", spdlog::sinks_init_list{file, console});
    logger->set_level(spdlog::level::info);
    logger->flush_on(spdlog::level::info);
    spdlog::set_default_logger(logger);
  }
  ~RunLog() { spdlog::set_default_logger(previous_); }
  RunLog(const RunLog&) = delete;
  RunLog& operator=(const RunLog&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

void snapshot(const fs::path& dir, const RunConfig& config, const std::vector<std::string>& args) {
  fs::create_directories(dir);
  write_text_file(dir / "config.json", to_json(config).dump(2) + "\n");
  write_text_file(dir / "command.json", Json{{"args", args}, {"seed", config.seed}}.dump(2) + "\n");
}

RunConfig config_or_defaults(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void apply_seed(RunConfig& config, const std::optional<std::uint64_t>& seed) {
  if (seed) config.seed = *seed;
  config.stage1.seed = config.stage2.seed = config.seed;
}

struct PipelineArgs {
  std::string stage, config, out;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  int stage = 1;
  std::string config, data, out, init;
  std::optional<std::uint64_t> seed;
  std::optional<long> max_steps;
};

struct EvalArgs {
  std::string checkpoint, data, out, config;
  std::vector<std::string> categories;
  std::optional<int> qualitative;
  std::optional<std::uint64_t> seed;
};

struct QualitySampleArgs {
  std::string data, out, annotator;
  std::size_t n = 216;
  std::uint64_t seed = 0;
};

struct QualityAggregateArgs {
  std::vector<std::string> sheets, labels;
  std::string out;
};

int do_pipeline(const PipelineArgs& a, bool mock, const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  RunConfig config = load_config(a.config);
  apply_seed(config, a.seed);
  const auto stage = data::parse_pipeline_stage(a.stage);
  RunLog log(a.out, "pipeline", err);
  snapshot(a.out, config, args);

  data::PipelineRun run;
  run.config = config.pipeline;
  run.seed = config.seed;
  run.out_dir = a.out;
  run.clients = data::make_clients(config.pipeline, mock);
  const auto outcome = data::run_pipeline(stage, run);
  for (const auto& line : outcome.summary) out << line << "\n";
  if (outcome.partial()) {
    err << fmt::format("pipeline {}: finished with {} failed annotation(s); see *_failures.jsonl in {}\n", a.stage,
                       outcome.failures, a.out);
    return kExitPartial;
  }
  return kExitOk;
}

int do_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config = config_or_defaults(a.config);
  apply_seed(config, a.seed);
  const training::StageConfig& stage = config.stage(a.stage);
  RunLog log(a.out, "train", err);
  snapshot(a.out, config, args);

  const auto dataset = training::TripletDataset::load(a.data, config.model.backbone.image_size);
  auto model = model::CirModel::create(config.model, config.seed);
  if (!a.init.empty()) model::load_checkpoint_into(model, a.init);
  else if (a.stage == 2) spdlog::warn("stage 2 without --init starts from freshly initialised adapters");

  spdlog::info("training {} on {} triplets", training::to_string(stage.stage), dataset.triplets().size());
  training::TrainOptions options;
  options.run_dir = fs::path(a.out);
  options.max_steps = a.max_steps;
  const auto result = training::train_stage(dataset, stage, model, options);
  model::save_checkpoint(model, fs::path(a.out) / "final.ckpt",
                         Json{{"stage", training::to_string(stage.stage)}, {"steps", result.log.size()}});
  const auto& last = result.log.back();
  out << fmt::format("{}: {} steps, final loss_cir {:.6f}{}\n", training::to_string(stage.stage), result.log.size(),
                     last.loss_cir, last.loss_ctr ? fmt::format(", loss_ctr {:.6f}", *last.loss_ctr) : "");
  out << "checkpoint: " << (fs::path(a.out) / "final.ckpt").string() << "\n";
  return kExitOk;
}

int do_eval(const EvalArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config = config_or_defaults(a.config);
  apply_seed(config, a.seed);
  RunLog log(a.out, "eval", err);
  const auto model = model::load_checkpoint(a.checkpoint);
  config.model = model.config();
  snapshot(a.out, config, args);

  eval::EvalOptions options;
  options.categories = a.categories.empty() ? config.eval.categories : a.categories;
  options.gallery = eval::parse_gallery_mode(config.eval.gallery);
  options.gallery_manifest = config.eval.gallery_manifest;
  options.qualitative = static_cast<std::size_t>(a.qualitative.value_or(config.eval.qualitative));
  options.seed = config.seed;
  options.workers = static_cast<std::size_t>(config.eval.workers);
  const auto report = eval::evaluate_dir(a.data, model, options);
  eval::write_report(report, a.out);
  out << report.to_table();
  return kExitOk;
}

int do_quality_sample(const QualitySampleArgs& a, std::ostream& out, std::ostream& err) {
  RunLog log(a.out, "quality", err);
  const auto triplets = data::read_triplet_manifest(fs::path(a.data) / "triplets.jsonl");
  const auto sheets = eval::sample_quality(triplets, a.n, a.seed, a.annotator);
  eval::write_quality_sheets(fs::path(a.out) / "sheets.jsonl", sheets);
  out << fmt::format("{} blank sheets written to {}\n", sheets.size(), (fs::path(a.out) / "sheets.jsonl").string());
  return kExitOk;
}

int do_quality_aggregate(const QualityAggregateArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.labels.empty() && a.labels.size() != a.sheets.size())
    throw ConfigError("give one --label per --sheets file, or none", "--label");
  RunLog log(a.out, "quality", err);
  std::vector<std::pair<std::string, eval::QualitySummary>> rows;
  Json json = Json::array();
  for (std::size_t i = 0; i < a.sheets.size(); ++i) {
    const std::string label = a.labels.empty() ? fs::path(a.sheets[i]).stem().string() : a.labels[i];
    const auto summary = eval::aggregate_quality(eval::read_quality_sheets(a.sheets[i]));
    Json row{{"dataset", label}};
    for (std::size_t c = 0; c < eval::kQualityCriteria.size(); ++c) {
      const auto& s = summary.criteria[c];
      row[eval::kQualityCriteria[c]] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
    }
    json.push_back(row);
    rows.emplace_back(label, summary);
  }
  const std::string table = eval::format_quality_table(rows);
  write_text_file(fs::path(a.out) / "quality.txt", table);
  write_text_file(fs::path(a.out) / "quality.json", json.dump(2) + "\n");
  out << table;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Composed image retrieval toolkit: dataset construction, training and evaluation.", "cirlab"};
  app.require_subcommand(1);
  app.fallthrough();
  bool mock = false;
  app.add_flag("--mock", mock, "Use deterministic local caption/synthesis services instead of HTTP ones");

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "Build triplets from a raw image pool");
  pipeline->add_option("stage", pa.stage, "embed | pair | caption | synthesize | build | enhance | all")->required();
  pipeline->add_option("--config", pa.config, "Run config (JSON)")->required();
  pipeline->add_option("--out", pa.out, "Run directory")->required();
  pipeline->add_option("--seed", pa.seed, "Overrides the config seed");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Run one training stage");
  train->add_option("--stage", ta.stage, "1 (pretraining) or 2 (fine-tuning)")->required()->check(CLI::IsMember({1, 2}));
  train->add_option("--config", ta.config, "Run config (JSON); defaults when omitted");
  train->add_option("--data", ta.data, "Dataset directory with images.jsonl and triplets.jsonl")->required();
  train->add_option("--out", ta.out, "Run directory")->required();
  train->add_option("--seed", ta.seed, "Overrides the config seed");
  train->add_option("--init", ta.init, "Checkpoint to start from (stage 2 usually starts from stage 1)");
  train->add_option("--max-steps", ta.max_steps, "Stop after this many optimisation steps");

  EvalArgs ea;
  auto* evaluate = app.add_subcommand("eval", "Recall@10/50 per category");
  evaluate->add_option("--checkpoint", ea.checkpoint, "Model checkpoint")->required();
  evaluate->add_option("--data", ea.data, "Dataset directory with images.jsonl and triplets.jsonl")->required();
  evaluate->add_option("--categories", ea.categories, "Categories to report (default: all present)");
  evaluate->add_option("--out", ea.out, "Report directory")->required();
  evaluate->add_option("--dump-qualitative", ea.qualitative, "Number of sampled queries to dump with their top-3");
  evaluate->add_option("--config", ea.config, "Run config providing the eval section");
  evaluate->add_option("--seed", ea.seed, "Seed for the qualitative sample");

  auto* quality = app.add_subcommand("quality", "Manual quality-audit protocol");
  quality->require_subcommand(1);
  QualitySampleArgs qs;
  auto* sample = quality->add_subcommand("sample", "Draw blank score sheets");
  sample->add_option("--data", qs.data, "Dataset directory with triplets.jsonl")->required();
  sample->add_option("--n", qs.n, "Sheets to draw")->capture_default_str();
  sample->add_option("--seed", qs.seed, "Sampling seed")->capture_default_str();
  sample->add_option("--annotator", qs.annotator, "Annotator id written on every sheet");
  sample->add_option("--out", qs.out, "Output directory")->required();
  QualityAggregateArgs qa;
  auto* aggregate = quality->add_subcommand("aggregate", "Mean and standard deviation per criterion");
  aggregate->add_option("--sheets", qa.sheets, "Scored sheet files, one table row each")->required();
  aggregate->add_option("--label", qa.labels, "Row label per sheet file");
  aggregate->add_option("--out", qa.out, "Output directory")->required();

  for (const auto& arg : args) {
    if (arg.starts_with("-")) continue;
    if (!app.get_subcommand_no_throw(arg)) {
      err << "error: unknown subcommand '" << arg << "'\n\n" << app.help();
      return kExitUsage;
    }
    break;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*pipeline) return do_pipeline(pa, mock, args, out, err);
    if (*train) return do_train(ta, args, out, err);
    if (*evaluate) return do_eval(ea, args, out, err);
    if (*sample) return do_quality_sample(qs, out, err);
    if (*aggregate) return do_quality_aggregate(qa, out, err);
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitFailure;
  } catch (const DataError& e) {
    err << "error: data: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cirlab::cli
