#include "cirlab/training/optimizer.hpp"

#include "cirlab/error.hpp"

#include <cmath>
#include <numbers>

namespace cirlab::training {

AdamW::AdamW(std::vector<ad::Parameter> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    first_moment_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    second_moment_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void AdamW::step(double learning_rate) {
  ++steps_;
  const double correction1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = params_[i];
    const ad::Matrix g = p.grad();
    first_moment_[i] = options_.beta1 * first_moment_[i] + (1.0 - options_.beta1) * g;
    second_moment_[i] = options_.beta2 * second_moment_[i] + (1.0 - options_.beta2) * g.cwiseAbs2();
    ad::Matrix& w = p.mutable_value();
    w *= 1.0 - learning_rate * options_.weight_decay;
    w.array() -= learning_rate * (first_moment_[i].array() / correction1) /
                 ((second_moment_[i].array() / correction2).sqrt() + options_.epsilon);
  }
}

LrSchedule parse_lr_schedule(const std::string& text) {
  if (text == "cosine") return LrSchedule::cosine;
  if (text == "constant") return LrSchedule::constant;
  throw ConfigError("expected 'cosine' or 'constant', got '" + text + "'");
}

std::string to_string(LrSchedule schedule) { return schedule == LrSchedule::cosine ? "cosine" : "constant"; }

double learning_rate_at(LrSchedule schedule, double base, long step, long total_steps) {
  if (schedule == LrSchedule::constant || total_steps <= 0) return base;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace cirlab::training
