#pragma once

#include <vector>

#include "fairpfn/tensor.hpp"

namespace fairpfn {

/// Linear warmup followed by cosine decay to a floor.
struct ScheduleConfig {
  double base_lr = 3e-4;
  double floor_lr = 0.0;
  i64 total_steps = 1;
  double warmup_frac = 0.05;
};

/// Learning rate for step (0-indexed). Non-increasing after warmup; the
/// first post-warmup step gets exactly the base rate and the final step
/// (total_steps - 1) gets exactly the floor.
double lr_at(i64 step, const ScheduleConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected adaptive-moment optimizer state over a fixed parameter set.
class AdamState {
 public:
  AdamState(const std::vector<Tensor*>& params, ScheduleConfig schedule, AdamConfig adam = {});

  /// One update over all parameters. Rejects the whole step (no state or
  /// parameter mutation, counter unchanged) if any gradient is non-finite;
  /// returns false in that case.
  bool step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

  i64 steps_taken() const { return step_; }
  double last_lr() const { return last_lr_; }
  const ScheduleConfig& schedule() const { return schedule_; }

 private:
  ScheduleConfig schedule_;
  AdamConfig adam_;
  std::vector<Tensor> m_, v_;
  i64 step_ = 0;
  double last_lr_ = 0.0;
};

}  // namespace fairpfn
