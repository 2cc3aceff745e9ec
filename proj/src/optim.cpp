#include "ham/optim.hpp"

#include <cmath>

#include "ham/errors.hpp"

namespace ham {

double lr_at(std::int64_t step, std::int64_t warmup_steps, double base_lr,
             std::int64_t total_steps) {
  if (step < 0) throw ConfigError("lr_at: negative step");
  if (warmup_steps < 0 || total_steps < warmup_steps) {
    throw ConfigError("lr_at: need 0 <= warmup_steps <= total_steps");
  }
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (step >= total_steps) return 0.0;
  double span = static_cast<double>(total_steps - warmup_steps);
  double phase = static_cast<double>(step - warmup_steps) / span;
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * phase));
}

void Adam::step(ParamStore& params, double lr) {
  ++step_count_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (Parameter* p : params.all()) {
    if (!p->grad.all_finite()) {
      throw TrainingError("non-finite gradient for parameter " + p->name);
    }
    auto it = state_.find(p->name);
    if (it == state_.end()) {
      it = state_.emplace(p->name, Moments{Array::zeros_like(p->value),
                                           Array::zeros_like(p->value)}).first;
    }
    Moments& mo = it->second;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
      mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
      double mhat = mo.m[i] / bc1;
      double vhat = mo.v[i] / bc2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace ham
