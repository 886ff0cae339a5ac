#pragma once

// Batch kernels. `feasc::kernels` holds the OpenMP-parallel versions used by
// the network; `feasc::reference` holds direct serial loops kept as oracles
// for tests and as the baseline in bench/.
//
// Parallel loops only split over independent outputs (samples, channels or
// weight rows), so results do not depend on the thread count.

#include <cstdint>
#include <span>
#include <vector>

#include "feasc/tensor.hpp"

namespace feasc {

struct Conv2dGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;

  int out_size(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
  int patch_size() const { return in_channels * kernel * kernel; }
};

namespace kernels {

/// x (N, Ci, H, W), weight (Co, Ci, k, k) -> (N, Co, Ho, Wo). When `cols` is
/// given it receives the unfolded input (Ci*k*k, N*Ho*Wo) for the backward pass.
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Conv2dGeometry& g, Tensor* cols = nullptr);

/// Accumulates into grad_weight; writes grad_x (same shape as the forward input) when non-null.
void conv2d_backward(const Tensor& grad_y, const Tensor& cols, const Tensor& weight, const Conv2dGeometry& g,
                     const std::vector<int>& x_shape, Tensor* grad_x, Tensor& grad_weight);

/// (N, C, H, W) -> (N, H, W), sum over channels.
Tensor channel_sum(const Tensor& features);

/// out[n,c,i,j] = (1 - mask[n,i,j]) * f[n,c,i,j]; mask holds N*H*W bytes.
Tensor apply_spatial_mask(const Tensor& features, std::span<const std::uint8_t> mask);

/// Training-mode batch normalization over all axes except 1.
/// Writes per-channel batch mean and 1/sqrt(var + eps) and the normalized input.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps,
                         std::vector<Scalar>& mean, std::vector<Scalar>& inv_std, Tensor& x_hat);

/// Inference-mode normalization with fixed statistics.
Tensor batchnorm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                           const Tensor& running_var, Scalar eps);

/// Gradient of batchnorm_forward; accumulates into grad_gamma / grad_beta.
Tensor batchnorm_backward(const Tensor& grad_y, const Tensor& x_hat, const Tensor& gamma,
                          const std::vector<Scalar>& inv_std, Tensor& grad_gamma, Tensor& grad_beta);

}  // namespace kernels

namespace reference {

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Conv2dGeometry& g);

/// Returns grad_x; accumulates into grad_weight.
Tensor conv2d_backward(const Tensor& x, const Tensor& grad_y, const Tensor& weight, const Conv2dGeometry& g,
                       Tensor& grad_weight);

Tensor channel_sum(const Tensor& features);

Tensor apply_spatial_mask(const Tensor& features, std::span<const std::uint8_t> mask);

}  // namespace reference

}  // namespace feasc
