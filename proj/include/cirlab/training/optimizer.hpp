#pragma once

#include "cirlab/autograd.hpp"

#include <string>
#include <vector>

namespace cirlab::training {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::vector<ad::Parameter> params, AdamWOptions options = {});

  void zero_grad();
  void step(double learning_rate);
  long steps() const { return steps_; }

 private:
  std::vector<ad::Parameter> params_;
  std::vector<ad::Matrix> first_moment_;
  std::vector<ad::Matrix> second_moment_;
  AdamWOptions options_;
  long steps_ = 0;
};

enum class LrSchedule { constant, cosine };

LrSchedule parse_lr_schedule(const std::string& text);
std::string to_string(LrSchedule schedule);

/// Learning rate for 0-based `step` out of `total_steps`; cosine decays to zero.
double learning_rate_at(LrSchedule schedule, double base, long step, long total_steps);

}  // namespace cirlab::training
