#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>

#include "ham/nn.hpp"

namespace ham {

// Linear warmup to base_lr over warmup_steps, then cosine decay to zero at
// total_steps. Step 0 maps to lr 0; steps past total_steps map to 0.
double lr_at(std::int64_t step, std::int64_t warmup_steps, double base_lr,
             std::int64_t total_steps);

// Adam with bias correction. First and second moments are kept per parameter,
// keyed by name so they survive checkpoint round-trips.
class Adam {
 public:
  struct Moments {
    Array m;
    Array v;
  };

  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Applies one update using the gradients currently stored on the
  // parameters. Throws TrainingError naming the parameter if its gradient is
  // not finite.
  void step(ParamStore& params, double lr);

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

  std::unordered_map<std::string, Moments>& state() { return state_; }
  const std::unordered_map<std::string, Moments>& state() const { return state_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t step_count_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

}  // namespace ham
