#pragma once

// Minimal layer library with explicit backward passes.
//
// Layers keep no per-call state: forward() writes what backward() needs into a
// caller-owned Saved record, so one network can be run on several inputs
// (two views, a suppressed copy) before any backward pass. Gradients
// accumulate into Parameter::grad until zero_grad().

#include <memory>
#include <string>
#include <vector>

#include "feasc/kernels.hpp"
#include "feasc/rng.hpp"
#include "feasc/tensor.hpp"

namespace feasc {

enum class Phase {
  train,         // batch statistics, running statistics updated
  train_frozen,  // batch statistics, running statistics untouched
  eval,          // running statistics
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;             // empty for buffers
  bool trainable = true;   // false for running statistics
};

struct Saved {
  std::vector<Tensor> tensors;
  std::vector<Scalar> a;
  std::vector<Scalar> b;
  std::vector<int> input_shape;
  Phase phase = Phase::train;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Saved* saved, Phase phase) = 0;
  /// Accumulates parameter gradients and returns dL/dx (empty if !input_grad).
  virtual Tensor backward(const Tensor& grad_y, const Saved& saved, bool input_grad) = 0;
  virtual std::vector<Parameter*> state() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual std::string kind() const = 0;
};

class Conv2d final : public Layer {
 public:
  Conv2d(const Conv2dGeometry& geometry, Rng& rng);
  Tensor forward(const Tensor& x, Saved* saved, Phase phase) override;
  Tensor backward(const Tensor& grad_y, const Saved& saved, bool input_grad) override;
  std::vector<Parameter*> state() override { return {&weight_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  std::string kind() const override { return "conv2d"; }
  const Conv2dGeometry& geometry() const { return geometry_; }

 private:
  Conv2dGeometry geometry_;
  Parameter weight_;
};

/// Batch normalization over rank-2 (N, C) or rank-4 (N, C, H, W) inputs.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(int channels, bool affine = true);
  Tensor forward(const Tensor& x, Saved* saved, Phase phase) override;
  Tensor backward(const Tensor& grad_y, const Saved& saved, bool input_grad) override;
  std::vector<Parameter*> state() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }
  std::string kind() const override { return "batchnorm"; }

  static constexpr Scalar kEps = 1e-5;
  static constexpr Scalar kMomentum = 0.1;

 private:
  bool affine_;
  Parameter gamma_, beta_, running_mean_, running_var_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved, Phase phase) override;
  Tensor backward(const Tensor& grad_y, const Saved& saved, bool input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(*this); }
  std::string kind() const override { return "relu"; }
};

/// (N, C, H, W) -> (N, C).
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Saved* saved, Phase phase) override;
  Tensor backward(const Tensor& grad_y, const Saved& saved, bool input_grad) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
  std::string kind() const override { return "gap"; }
};

/// y = x W^T + b with W of shape (out, in).
class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, Rng& rng, bool bias = true);
  Tensor forward(const Tensor& x, Saved* saved, Phase phase) override;
  Tensor backward(const Tensor& grad_y, const Saved& saved, bool input_grad) override;
  std::vector<Parameter*> state() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Linear>(*this); }
  std::string kind() const override { return "linear"; }
  int in_features() const { return weight_.value.dim(1); }
  int out_features() const { return weight_.value.dim(0); }

 private:
  bool has_bias_;
  Parameter weight_, bias_;
};

struct Trace {
  std::vector<Saved> layers;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <class L, class... Args>
  Sequential& add(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }
  /// Parameter names become "<index>.<name>".
  Sequential& add(std::unique_ptr<Layer> layer);

  /// With a trace, records what backward() needs. Without one, inference only.
  Tensor forward(const Tensor& x, Trace* trace, Phase phase);
  Tensor backward(const Tensor& grad_y, const Trace& trace, bool input_grad = true);

  /// Parameters and buffers in layer order.
  std::vector<Parameter*> state();
  std::vector<const Parameter*> state() const;
  std::vector<Parameter*> parameters();

  void zero_grad();
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  std::size_t parameter_count() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// target <- tau * target + (1 - tau) * online for every parameter and buffer.
void ema_update(Sequential& target, const Sequential& online, double tau);

/// Bitwise equality of all parameters and buffers.
bool same_state(const Sequential& a, const Sequential& b);

}  // namespace feasc
