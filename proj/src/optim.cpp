#include "feasc/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace feasc {

void SgdConfig::validate() const {
  if (!(momentum >= 0 && momentum < 1)) throw ValidationError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0)) throw ValidationError("weight decay must be non-negative");
}

Sgd::Sgd(std::vector<Parameter*> params, SgdConfig config) : params_(std::move(params)), config_(config) {
  config_.validate();
  for (const Parameter* p : params_) velocity_.emplace_back(p->value.shape());
}

void Sgd::step(double lr) {
  if (!(lr >= 0)) throw ValidationError("learning rate must be non-negative");
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Tensor& v = velocity_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = config_.momentum * v[i] + p.grad[i] + config_.weight_decay * p.value[i];
      p.value[i] -= lr * v[i];
    }
  }
}

double lr_at(long step, long total_steps, long warmup_steps, double base_lr) {
  if (step < 0 || step >= total_steps)
    throw ValidationError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + ")");
  if (warmup_steps < 0 || warmup_steps >= total_steps) throw ValidationError("warm-up must be shorter than training");
  if (base_lr < 0) throw ValidationError("base learning rate must be non-negative");
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace feasc
