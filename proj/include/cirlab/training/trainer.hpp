#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/model/cir_model.hpp"
#include "cirlab/training/dataset.hpp"
#include "cirlab/training/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cirlab::training {

enum class Stage { stage1_pretrain, stage2_finetune };

std::string to_string(Stage stage);

struct StageConfig {
  Stage stage = Stage::stage1_pretrain;
  bool use_ctr = true;
  std::set<std::string> frozen_groups{"backbone"};
  std::string optimizer_name = "adamw";
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  LrSchedule lr_schedule = LrSchedule::cosine;
  int batch_size = 16;
  int epochs = 1;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  double cir_weight = 1.0;
  double ctr_weight = 1.0;

  /// Stage 1: CIR + CTR, backbone frozen. Stage 2: CIR only, backbone and adapters frozen.
  static StageConfig defaults(Stage stage);
  /// Throws ConfigError naming `path.<key>` for any broken stage invariant.
  void validate(const std::string& path = "stage") const;

  bool operator==(const StageConfig&) const = default;
};

/// `seed` and `stage` are not serialised: the stage comes from the section, the seed from
/// the run config's top-level seed.
Json to_json(const StageConfig& config);
StageConfig stage_config_from_json(const Json& json, Stage stage, const std::string& path);

struct StepMetrics {
  long step = 0;
  int epoch = 0;
  double loss_cir = 0.0;
  std::optional<double> loss_ctr;
  double lr = 0.0;

  Json to_json() const;
};

struct TrainOptions {
  /// When set: metrics.jsonl is appended per step and a checkpoint written per epoch.
  std::optional<std::filesystem::path> run_dir;
  std::optional<long> max_steps;
  std::function<void(const StepMetrics&)> on_step;
};

struct TrainResult {
  std::vector<StepMetrics> log;
};

/// Trains every non-frozen parameter group with AdamW on in-batch contrastive losses.
/// Deterministic for a fixed config seed.
TrainResult train_stage(const TripletDataset& dataset, const StageConfig& config, model::CirModel& model,
                        const TrainOptions& options = {});

}  // namespace cirlab::training
