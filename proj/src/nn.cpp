#include "feasc/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace feasc {

namespace {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Parameter make_parameter(std::string name, std::vector<int> shape, bool trainable, Scalar fill = 0) {
  Parameter p{std::move(name), Tensor(shape, fill), {}, trainable};
  if (trainable) p.grad = Tensor(std::move(shape));
  return p;
}

}  // namespace

Conv2d::Conv2d(const Conv2dGeometry& geometry, Rng& rng)
    : geometry_(geometry),
      weight_(make_parameter("weight", {geometry.out_channels, geometry.in_channels, geometry.kernel, geometry.kernel},
                             true)) {
  if (geometry.in_channels < 1 || geometry.out_channels < 1 || geometry.kernel < 1 || geometry.stride < 1 ||
      geometry.padding < 0)
    throw ValidationError("invalid conv2d geometry");
  // He-normal initialisation for ReLU networks
  const double std_dev = std::sqrt(2.0 / geometry.patch_size());
  for (auto& w : weight_.value.values()) w = std_dev * rng.normal();
}

Tensor Conv2d::forward(const Tensor& x, Saved* saved, Phase) {
  if (!saved) return kernels::conv2d_forward(x, weight_.value, geometry_);
  saved->tensors.resize(1);
  saved->input_shape = x.shape();
  return kernels::conv2d_forward(x, weight_.value, geometry_, &saved->tensors[0]);
}

Tensor Conv2d::backward(const Tensor& grad_y, const Saved& saved, bool input_grad) {
  Tensor gx;
  kernels::conv2d_backward(grad_y, saved.tensors.at(0), weight_.value, geometry_, saved.input_shape,
                           input_grad ? &gx : nullptr, weight_.grad);
  return gx;
}

BatchNorm::BatchNorm(int channels, bool affine)
    : affine_(affine),
      gamma_(make_parameter("gamma", {channels}, affine, 1)),
      beta_(make_parameter("beta", {channels}, affine, 0)),
      running_mean_(make_parameter("running_mean", {channels}, false, 0)),
      running_var_(make_parameter("running_var", {channels}, false, 1)) {
  if (channels < 1) throw ValidationError("batchnorm needs at least one channel");
}

std::vector<Parameter*> BatchNorm::state() {
  if (affine_) return {&gamma_, &beta_, &running_mean_, &running_var_};
  return {&running_mean_, &running_var_};
}

Tensor BatchNorm::forward(const Tensor& x, Saved* saved, Phase phase) {
  if (x.dim(1) != gamma_.value.dim(0)) throw ValidationError("batchnorm channel mismatch for " + x.shape_string());
  if (phase == Phase::eval)
    return kernels::batchnorm_inference(x, gamma_.value, beta_.value, running_mean_.value, running_var_.value, kEps);

  const std::size_t count = x.size() / static_cast<std::size_t>(x.dim(1));
  if (count < 2) throw ValidationError("batchnorm in training needs more than one value per channel");
  Saved local;
  Saved& s = saved ? *saved : local;
  s.tensors.resize(1);
  s.phase = phase;
  Tensor y = kernels::batchnorm_forward(x, gamma_.value, beta_.value, kEps, s.a, s.b, s.tensors[0]);
  if (phase == Phase::train) {
    const Scalar unbias = static_cast<Scalar>(count) / static_cast<Scalar>(count - 1);
    for (int c = 0; c < x.dim(1); ++c) {
      const Scalar var = 1 / (s.b[c] * s.b[c]) - kEps;
      running_mean_.value[c] = (1 - kMomentum) * running_mean_.value[c] + kMomentum * s.a[c];
      running_var_.value[c] = (1 - kMomentum) * running_var_.value[c] + kMomentum * var * unbias;
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_y, const Saved& saved, bool) {
  if (saved.phase == Phase::eval) throw ValidationError("batchnorm backward through inference mode is unsupported");
  Tensor dummy_gamma({gamma_.value.dim(0)}), dummy_beta({gamma_.value.dim(0)});
  return kernels::batchnorm_backward(grad_y, saved.tensors.at(0), gamma_.value, saved.b,
                                     affine_ ? gamma_.grad : dummy_gamma, affine_ ? beta_.grad : dummy_beta);
}

Tensor ReLU::forward(const Tensor& x, Saved* saved, Phase) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0 ? v : Scalar{0};
  if (saved) saved->tensors = {y};
  return y;
}

Tensor ReLU::backward(const Tensor& grad_y, const Saved& saved, bool) {
  Tensor gx = grad_y;
  const Tensor& y = saved.tensors.at(0);
  for (std::size_t i = 0; i < gx.size(); ++i)
    if (!(y[i] > 0)) gx[i] = 0;
  return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Saved* saved, Phase) {
  if (x.rank() != 4) throw ValidationError("global pooling expects NCHW input, got " + x.shape_string());
  const int n_batch = x.dim(0), channels = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor y({n_batch, channels});
  for (int n = 0; n < n_batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const Scalar* src = x.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      Scalar s = 0;
      for (std::size_t p = 0; p < plane; ++p) s += src[p];
      y.at(n, c) = s / static_cast<Scalar>(plane);
    }
  if (saved) saved->input_shape = x.shape();
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_y, const Saved& saved, bool) {
  Tensor gx(saved.input_shape);
  const int n_batch = gx.dim(0), channels = gx.dim(1);
  const std::size_t plane = static_cast<std::size_t>(gx.dim(2)) * gx.dim(3);
  for (int n = 0; n < n_batch; ++n)
    for (int c = 0; c < channels; ++c) {
      const Scalar g = grad_y.at(n, c) / static_cast<Scalar>(plane);
      Scalar* dst = gx.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = g;
    }
  return gx;
}

Linear::Linear(int in_features, int out_features, Rng& rng, bool bias)
    : has_bias_(bias),
      weight_(make_parameter("weight", {out_features, in_features}, true)),
      bias_(make_parameter("bias", {out_features}, bias)) {
  if (in_features < 1 || out_features < 1) throw ValidationError("linear layer dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  for (auto& w : weight_.value.values()) w = rng.uniform(-bound, bound);
  if (bias)
    for (auto& b : bias_.value.values()) b = rng.uniform(-bound, bound);
}

std::vector<Parameter*> Linear::state() {
  if (has_bias_) return {&weight_, &bias_};
  return {&weight_};
}

Tensor Linear::forward(const Tensor& x, Saved* saved, Phase) {
  if (x.rank() != 2 || x.dim(1) != in_features())
    throw ValidationError("linear layer expects (N, " + std::to_string(in_features()) + "), got " + x.shape_string());
  const int n_batch = x.dim(0), out = out_features();
  Tensor y({n_batch, out});
  MatrixMap ym(y.data(), n_batch, out);
  ym.noalias() = ConstMatrixMap(x.data(), n_batch, in_features()) *
                 ConstMatrixMap(weight_.value.data(), out, in_features()).transpose();
  if (has_bias_)
    for (int n = 0; n < n_batch; ++n)
      for (int o = 0; o < out; ++o) y.at(n, o) += bias_.value[o];
  if (saved) saved->tensors = {x};
  return y;
}

Tensor Linear::backward(const Tensor& grad_y, const Saved& saved, bool input_grad) {
  const Tensor& x = saved.tensors.at(0);
  const int n_batch = x.dim(0), out = out_features(), in = in_features();
  ConstMatrixMap gy(grad_y.data(), n_batch, out);
  MatrixMap(weight_.grad.data(), out, in).noalias() += gy.transpose() * ConstMatrixMap(x.data(), n_batch, in);
  if (has_bias_)
    for (int n = 0; n < n_batch; ++n)
      for (int o = 0; o < out; ++o) bias_.grad[o] += grad_y.at(n, o);
  if (!input_grad) return {};
  Tensor gx({n_batch, in});
  MatrixMap(gx.data(), n_batch, in).noalias() = gy * ConstMatrixMap(weight_.value.data(), out, in);
  return gx;
}

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Sequential::forward(const Tensor& x, Trace* trace, Phase phase) {
  if (trace) trace->layers.assign(layers_.size(), Saved{});
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, trace ? &trace->layers[i] : nullptr, phase);
  return h;
}

Tensor Sequential::backward(const Tensor& grad_y, const Trace& trace, bool input_grad) {
  if (trace.layers.size() != layers_.size()) throw ValidationError("trace does not belong to this network");
  Tensor g = grad_y;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, trace.layers[i], input_grad || i > 0);
  return g;
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  for (Parameter* p : layer->state()) p->name = std::to_string(layers_.size()) + "." + p->name;
  layers_.push_back(std::move(layer));
  return *this;
}

std::vector<Parameter*> Sequential::state() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_)
    for (Parameter* p : layer->state()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Sequential::state() const {
  auto mutable_state = const_cast<Sequential*>(this)->state();
  return {mutable_state.begin(), mutable_state.end()};
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (Parameter* p : state())
    if (p->trainable) out.push_back(p);
  return out;
}

void Sequential::zero_grad() {
  for (Parameter* p : parameters()) p->grad.fill(0);
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : state())
    if (p->trainable) n += p->value.size();
  return n;
}

void ema_update(Sequential& target, const Sequential& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("EMA momentum tau must lie in [0, 1]");
  auto dst = target.state();
  auto src = online.state();
  if (dst.size() != src.size()) throw ValidationError("EMA update between networks of different structure");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!dst[i]->value.same_shape(src[i]->value))
      throw ValidationError("EMA update shape mismatch at " + dst[i]->name);
    auto d = dst[i]->value.values();
    auto s = src[i]->value.values();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] = tau * d[j] + (1 - tau) * s[j];
  }
}

bool same_state(const Sequential& a, const Sequential& b) {
  auto sa = a.state();
  auto sb = b.state();
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (!sa[i]->value.same_shape(sb[i]->value)) return false;
    auto va = sa[i]->value.values();
    auto vb = sb[i]->value.values();
    if (!std::equal(va.begin(), va.end(), vb.begin())) return false;
  }
  return true;
}

}  // namespace feasc
