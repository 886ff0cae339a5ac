#pragma once

#include <vector>

#include "feasc/nn.hpp"

namespace feasc {

struct SgdConfig {
  double momentum = 0.5;
  double weight_decay = 1e-4;
  void validate() const;
};

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
/// v <- mu * v + (g + wd * w);  w <- w - lr * v.
class Sgd {
 public:
  Sgd(std::vector<Parameter*> params, SgdConfig config);

  void step(double lr);
  const SgdConfig& config() const { return config_; }
  std::vector<Tensor>& velocity() { return velocity_; }
  const std::vector<Tensor>& velocity() const { return velocity_; }

 private:
  std::vector<Parameter*> params_;
  SgdConfig config_;
  std::vector<Tensor> velocity_;
};

/// Linear warm-up from 0 to base_lr over warmup_steps, then half-cosine decay
/// to 0 at total_steps, measured over the post-warm-up span.
double lr_at(long step, long total_steps, long warmup_steps, double base_lr);

}  // namespace feasc
