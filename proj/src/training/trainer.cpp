#include "cirlab/training/trainer.hpp"

#include "cirlab/error.hpp"
#include "cirlab/model/checkpoint.hpp"
#include "cirlab/seed.hpp"
#include "cirlab/strict_json.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace cirlab::training {

std::string to_string(Stage stage) { return stage == Stage::stage1_pretrain ? "stage1_pretrain" : "stage2_finetune"; }

StageConfig StageConfig::defaults(Stage stage) {
  StageConfig c;
  c.stage = stage;
  if (stage == Stage::stage2_finetune) {
    c.use_ctr = false;
    c.frozen_groups = {"backbone", "adapters"};
  }
  return c;
}

void StageConfig::validate(const std::string& path) const {
  auto key = [&](const char* k) { return path + "." + k; };
  for (const auto& group : frozen_groups) {
    if (std::find(model::kParameterGroups.begin(), model::kParameterGroups.end(), group) ==
        model::kParameterGroups.end())
      throw ConfigError("unknown parameter group '" + group + "'", key("frozen_groups"));
  }
  if (!frozen_groups.contains("backbone")) throw ConfigError("the backbone must stay frozen", key("frozen_groups"));
  if (stage == Stage::stage1_pretrain) {
    for (const char* group : {"adapters", "fusion", "mixer"})
      if (frozen_groups.contains(group))
        throw ConfigError(std::string("stage 1 trains the ") + group + " group; it cannot be frozen", key("frozen_groups"));
  } else {
    if (!frozen_groups.contains("adapters")) throw ConfigError("stage 2 must freeze the adapters", key("frozen_groups"));
    if (use_ctr) throw ConfigError("stage 2 trains with the CIR loss only", key("use_ctr"));
  }
  if (optimizer_name != "adamw") throw ConfigError("only 'adamw' is supported", key("optimizer"));
  if (!(learning_rate > 0.0)) throw ConfigError("must be positive", key("learning_rate"));
  if (weight_decay < 0.0) throw ConfigError("must be non-negative", key("weight_decay"));
  if (batch_size < 2) throw ConfigError("must be at least 2 (in-batch negatives)", key("batch_size"));
  if (epochs < 1) throw ConfigError("must be positive", key("epochs"));
  if (!(temperature > 0.0)) throw ConfigError("must be positive", key("temperature"));
  if (cir_weight < 0.0 || ctr_weight < 0.0) throw ConfigError("loss weights must be non-negative", key("cir_weight"));
}

Json to_json(const StageConfig& c) {
  return Json{{"use_ctr", c.use_ctr},
              {"frozen_groups", c.frozen_groups},
              {"optimizer", c.optimizer_name},
              {"learning_rate", c.learning_rate},
              {"weight_decay", c.weight_decay},
              {"lr_schedule", to_string(c.lr_schedule)},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"temperature", c.temperature},
              {"cir_weight", c.cir_weight},
              {"ctr_weight", c.ctr_weight}};
}

StageConfig stage_config_from_json(const Json& json, Stage stage, const std::string& path) {
  StageConfig c = StageConfig::defaults(stage);
  StrictReader r(json, path);
  r.read("use_ctr", c.use_ctr);
  std::vector<std::string> frozen;
  if (r.read("frozen_groups", frozen)) c.frozen_groups = {frozen.begin(), frozen.end()};
  r.read("optimizer", c.optimizer_name);
  r.read("learning_rate", c.learning_rate);
  r.read("weight_decay", c.weight_decay);
  std::string schedule = to_string(c.lr_schedule);
  if (r.read("lr_schedule", schedule)) {
    try {
      c.lr_schedule = parse_lr_schedule(schedule);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), r.key_path("lr_schedule"));
    }
  }
  r.read("batch_size", c.batch_size);
  r.read("epochs", c.epochs);
  r.read("temperature", c.temperature);
  r.read("cir_weight", c.cir_weight);
  r.read("ctr_weight", c.ctr_weight);
  r.finish();
  c.validate(path);
  return c;
}

Json StepMetrics::to_json() const {
  Json j{{"step", step}, {"epoch", epoch}, {"loss_cir", loss_cir}};
  j["loss_ctr"] = loss_ctr ? Json(*loss_ctr) : Json(nullptr);
  j["lr"] = lr;
  return j;
}

namespace {

// Restores every parameter's trainable flag on scope exit.
class TrainableScope {
 public:
  explicit TrainableScope(const model::CirModel& model) {
    for (auto& named : model.all_parameters()) saved_.emplace_back(named.param, named.param.trainable());
  }
  ~TrainableScope() {
    for (auto& [param, flag] : saved_) param.set_trainable(flag);
  }
  TrainableScope(const TrainableScope&) = delete;
  TrainableScope& operator=(const TrainableScope&) = delete;

 private:
  std::vector<std::pair<ad::Parameter, bool>> saved_;
};

}  // namespace

TrainResult train_stage(const TripletDataset& dataset, const StageConfig& config, model::CirModel& model,
                        const TrainOptions& options) {
  config.validate();
  const std::size_t n = dataset.triplets().size();
  if (n < 2) throw ContractViolation("training needs at least 2 triplets");
  if (config.use_ctr && !dataset.has_captions()) {
    throw ConfigError("use_ctr is set but the dataset has no image captions (Fashion IQ style data does not contain "
                      "image-caption pairs)",
                      "stage.use_ctr");
  }

  TrainableScope restore(model);
  std::vector<ad::Parameter> trainable;
  for (auto group : model::kParameterGroups) {
    const bool frozen = config.frozen_groups.contains(std::string(group));
    for (auto& named : model.parameters(group)) {
      named.param.set_trainable(!frozen);
      if (!frozen) trainable.push_back(named.param);
    }
  }
  AdamW optimizer(trainable, AdamWOptions{.weight_decay = config.weight_decay});

  const std::size_t batch_size = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  const std::size_t remainder = n % batch_size;
  const std::size_t batches_per_epoch = n / batch_size + (remainder >= 2 ? 1 : 0);
  long total_steps = static_cast<long>(batches_per_epoch) * config.epochs;
  if (options.max_steps) total_steps = std::min(total_steps, *options.max_steps);

  std::optional<JsonlAppender> metrics_log;
  if (options.run_dir) metrics_log.emplace(*options.run_dir / "metrics.jsonl", true);

  auto rng = substream(config.seed, "shuffle");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs && step < total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches_per_epoch && step < total_steps; ++b) {
      const std::size_t begin = b * batch_size;
      const std::size_t end = std::min(n, begin + batch_size);
      const TripletBatch batch = dataset.batch(std::span(order).subspan(begin, end - begin));

      const BatchLosses losses = batch_losses(batch, model, config.use_ctr, config.temperature);
      ad::Var total = ad::scale(losses.cir, config.cir_weight);
      if (losses.ctr.defined()) total = ad::add(total, ad::scale(losses.ctr, config.ctr_weight));

      optimizer.zero_grad();
      total.backward();
      const double lr = learning_rate_at(config.lr_schedule, config.learning_rate, step, total_steps);
      optimizer.step(lr);
      ++step;

      StepMetrics metrics{step, epoch, losses.cir.item(), std::nullopt, lr};
      if (losses.ctr.defined()) metrics.loss_ctr = losses.ctr.item();
      if (metrics_log) metrics_log->append(metrics.to_json());
      if (options.on_step) options.on_step(metrics);
      result.log.push_back(metrics);
    }
    if (options.run_dir) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
      model::save_checkpoint(model, *options.run_dir / "checkpoints" / name,
                             Json{{"stage", to_string(config.stage)}, {"epoch", epoch}, {"step", step}});
    }
    spdlog::debug("{} epoch {} done at step {}", to_string(config.stage), epoch, step);
  }
  return result;
}

}  // namespace cirlab::training
