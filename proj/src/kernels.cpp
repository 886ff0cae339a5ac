#include "feasc/kernels.hpp"

#include <Eigen/Core>
#include <cmath>

namespace feasc {

namespace {

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void check_conv_input(const Tensor& x, const Tensor& weight, const Conv2dGeometry& g) {
  if (x.rank() != 4 || x.dim(1) != g.in_channels)
    throw ValidationError("conv2d input " + x.shape_string() + " does not match in_channels");
  if (weight.shape() != std::vector<int>{g.out_channels, g.in_channels, g.kernel, g.kernel})
    throw ValidationError("conv2d weight shape " + weight.shape_string() + " does not match geometry");
  if (g.out_size(x.dim(2)) < 1 || g.out_size(x.dim(3)) < 1)
    throw ValidationError("conv2d input too small for kernel");
}

// Extent of the channel axis and the number of elements per (sample, channel).
struct ChannelLayout {
  int batch;
  int channels;
  std::size_t inner;
};

ChannelLayout channel_layout(const Tensor& x) {
  if (x.rank() != 2 && x.rank() != 4) throw ValidationError("batchnorm expects rank 2 or 4, got " + x.shape_string());
  std::size_t inner = x.rank() == 4 ? static_cast<std::size_t>(x.dim(2)) * x.dim(3) : 1;
  return {x.dim(0), x.dim(1), inner};
}

void check_mask_span(const Tensor& features, std::span<const std::uint8_t> mask) {
  if (features.rank() != 4) throw ValidationError("spatial mask expects NCHW features");
  const std::size_t expected = static_cast<std::size_t>(features.dim(0)) * features.dim(2) * features.dim(3);
  if (mask.size() != expected) throw ValidationError("spatial mask size does not match feature batch");
}

}  // namespace

namespace kernels {

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Conv2dGeometry& g, Tensor* cols) {
  check_conv_input(x, weight, g);
  const int n_batch = x.dim(0), height = x.dim(2), width = x.dim(3);
  const int out_h = g.out_size(height), out_w = g.out_size(width);
  const int patch = g.patch_size();
  const long plane = static_cast<long>(out_h) * out_w;
  const long total_cols = plane * n_batch;

  Tensor local;
  Tensor& unfolded = cols ? *cols : local;
  unfolded = Tensor({patch, static_cast<int>(total_cols)});
  Scalar* ucol = unfolded.data();
  const Scalar* xin = x.data();

#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    for (int ci = 0; ci < g.in_channels; ++ci) {
      const Scalar* xplane = xin + (static_cast<std::size_t>(n) * g.in_channels + ci) * height * width;
      for (int ky = 0; ky < g.kernel; ++ky) {
        for (int kx = 0; kx < g.kernel; ++kx) {
          const long row = (static_cast<long>(ci) * g.kernel + ky) * g.kernel + kx;
          Scalar* dst = ucol + row * total_cols + n * plane;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * g.stride - g.padding + ky;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * g.stride - g.padding + kx;
              dst[oy * out_w + ox] =
                  (iy >= 0 && iy < height && ix >= 0 && ix < width) ? xplane[iy * width + ix] : Scalar{0};
            }
          }
        }
      }
    }
  }

  RowMatrix product(g.out_channels, total_cols);
  product.noalias() = ConstMatrixMap(weight.data(), g.out_channels, patch) *
                      ConstMatrixMap(unfolded.data(), patch, total_cols);

  Tensor y({n_batch, g.out_channels, out_h, out_w});
  Scalar* yout = y.data();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      const Scalar* src = product.data() + co * total_cols + n * plane;
      Scalar* dst = yout + (static_cast<std::size_t>(n) * g.out_channels + co) * plane;
      for (long p = 0; p < plane; ++p) dst[p] = src[p];
    }
  }
  return y;
}

void conv2d_backward(const Tensor& grad_y, const Tensor& cols, const Tensor& weight, const Conv2dGeometry& g,
                     const std::vector<int>& x_shape, Tensor* grad_x, Tensor& grad_weight) {
  const int n_batch = grad_y.dim(0), out_h = grad_y.dim(2), out_w = grad_y.dim(3);
  const int height = x_shape[2], width = x_shape[3];
  const int patch = g.patch_size();
  const long plane = static_cast<long>(out_h) * out_w;
  const long total_cols = plane * n_batch;
  if (cols.shape() != std::vector<int>{patch, static_cast<int>(total_cols)})
    throw ValidationError("conv2d backward: saved columns do not match gradient shape");

  RowMatrix gy(g.out_channels, total_cols);
  const Scalar* gin = grad_y.data();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < g.out_channels; ++co) {
      const Scalar* src = gin + (static_cast<std::size_t>(n) * g.out_channels + co) * plane;
      Scalar* dst = gy.data() + co * total_cols + n * plane;
      for (long p = 0; p < plane; ++p) dst[p] = src[p];
    }
  }

  ConstMatrixMap unfolded(cols.data(), patch, total_cols);
  MatrixMap(grad_weight.data(), g.out_channels, patch).noalias() += gy * unfolded.transpose();

  if (!grad_x) return;
  RowMatrix gcols(patch, total_cols);
  gcols.noalias() = ConstMatrixMap(weight.data(), g.out_channels, patch).transpose() * gy;

  *grad_x = Tensor(x_shape);
  Scalar* gx = grad_x->data();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    for (int ci = 0; ci < g.in_channels; ++ci) {
      Scalar* xplane = gx + (static_cast<std::size_t>(n) * g.in_channels + ci) * height * width;
      for (int ky = 0; ky < g.kernel; ++ky) {
        for (int kx = 0; kx < g.kernel; ++kx) {
          const long row = (static_cast<long>(ci) * g.kernel + ky) * g.kernel + kx;
          const Scalar* src = gcols.data() + row * total_cols + n * plane;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * g.stride - g.padding + ky;
            if (iy < 0 || iy >= height) continue;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * g.stride - g.padding + kx;
              if (ix >= 0 && ix < width) xplane[iy * width + ix] += src[oy * out_w + ox];
            }
          }
        }
      }
    }
  }
}

Tensor channel_sum(const Tensor& features) {
  if (features.rank() != 4) throw ValidationError("channel_sum expects NCHW features");
  const int n_batch = features.dim(0), channels = features.dim(1);
  const std::size_t plane = static_cast<std::size_t>(features.dim(2)) * features.dim(3);
  Tensor out({n_batch, features.dim(2), features.dim(3)});
  const Scalar* f = features.data();
  Scalar* o = out.data();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    Scalar* dst = o + n * plane;
    for (int k = 0; k < channels; ++k) {
      const Scalar* src = f + (static_cast<std::size_t>(n) * channels + k) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] += src[p];
    }
  }
  return out;
}

Tensor apply_spatial_mask(const Tensor& features, std::span<const std::uint8_t> mask) {
  check_mask_span(features, mask);
  const int n_batch = features.dim(0), channels = features.dim(1);
  const std::size_t plane = static_cast<std::size_t>(features.dim(2)) * features.dim(3);
  Tensor out(features.shape());
  const Scalar* f = features.data();
  Scalar* o = out.data();
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    const std::uint8_t* m = mask.data() + n * plane;
    for (int k = 0; k < channels; ++k) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + k) * plane;
      for (std::size_t p = 0; p < plane; ++p) o[base + p] = m[p] ? Scalar{0} : f[base + p];
    }
  }
  return out;
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps,
                         std::vector<Scalar>& mean, std::vector<Scalar>& inv_std, Tensor& x_hat) {
  const auto [n_batch, channels, inner] = channel_layout(x);
  const Scalar count = static_cast<Scalar>(n_batch) * static_cast<Scalar>(inner);
  mean.assign(channels, 0);
  inv_std.assign(channels, 0);
  x_hat = Tensor(x.shape());
  Tensor y(x.shape());
  const Scalar* xin = x.data();

#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    Scalar sum = 0;
    for (int n = 0; n < n_batch; ++n) {
      const Scalar* src = xin + (static_cast<std::size_t>(n) * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) sum += src[i];
    }
    const Scalar mu = sum / count;
    Scalar sq = 0;
    for (int n = 0; n < n_batch; ++n) {
      const Scalar* src = xin + (static_cast<std::size_t>(n) * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) sq += (src[i] - mu) * (src[i] - mu);
    }
    const Scalar istd = 1 / std::sqrt(sq / count + eps);
    mean[c] = mu;
    inv_std[c] = istd;
    for (int n = 0; n < n_batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const Scalar h = (xin[base + i] - mu) * istd;
        x_hat[base + i] = h;
        y[base + i] = gamma[c] * h + beta[c];
      }
    }
  }
  return y;
}

Tensor batchnorm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                           const Tensor& running_var, Scalar eps) {
  const auto [n_batch, channels, inner] = channel_layout(x);
  Tensor y(x.shape());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const Scalar istd = 1 / std::sqrt(running_var[c] + eps);
    for (int n = 0; n < n_batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) y[base + i] = gamma[c] * (x[base + i] - running_mean[c]) * istd + beta[c];
    }
  }
  return y;
}

Tensor batchnorm_backward(const Tensor& grad_y, const Tensor& x_hat, const Tensor& gamma,
                          const std::vector<Scalar>& inv_std, Tensor& grad_gamma, Tensor& grad_beta) {
  const auto [n_batch, channels, inner] = channel_layout(grad_y);
  const Scalar count = static_cast<Scalar>(n_batch) * static_cast<Scalar>(inner);
  Tensor gx(grad_y.shape());
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    Scalar sum_g = 0, sum_gh = 0;
    for (int n = 0; n < n_batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_g += grad_y[base + i];
        sum_gh += grad_y[base + i] * x_hat[base + i];
      }
    }
    grad_gamma[c] += sum_gh;
    grad_beta[c] += sum_g;
    const Scalar scale = gamma[c] * inv_std[c] / count;
    for (int n = 0; n < n_batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i)
        gx[base + i] = scale * (count * grad_y[base + i] - sum_g - x_hat[base + i] * sum_gh);
    }
  }
  return gx;
}

}  // namespace kernels

namespace reference {

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Conv2dGeometry& g) {
  check_conv_input(x, weight, g);
  const int n_batch = x.dim(0), height = x.dim(2), width = x.dim(3);
  const int out_h = g.out_size(height), out_w = g.out_size(width);
  Tensor y({n_batch, g.out_channels, out_h, out_w});
  for (int n = 0; n < n_batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          Scalar acc = 0;
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.padding + ky;
                const int ix = ox * g.stride - g.padding + kx;
                if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
                acc += weight.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
              }
          y.at(n, co, oy, ox) = acc;
        }
  return y;
}

Tensor conv2d_backward(const Tensor& x, const Tensor& grad_y, const Tensor& weight, const Conv2dGeometry& g,
                       Tensor& grad_weight) {
  check_conv_input(x, weight, g);
  const int n_batch = x.dim(0), height = x.dim(2), width = x.dim(3);
  const int out_h = grad_y.dim(2), out_w = grad_y.dim(3);
  Tensor gx(x.shape());
  for (int n = 0; n < n_batch; ++n)
    for (int co = 0; co < g.out_channels; ++co)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          const Scalar gv = grad_y.at(n, co, oy, ox);
          for (int ci = 0; ci < g.in_channels; ++ci)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.padding + ky;
                const int ix = ox * g.stride - g.padding + kx;
                if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
                grad_weight.at(co, ci, ky, kx) += gv * x.at(n, ci, iy, ix);
                gx.at(n, ci, iy, ix) += gv * weight.at(co, ci, ky, kx);
              }
        }
  return gx;
}

Tensor channel_sum(const Tensor& features) {
  if (features.rank() != 4) throw ValidationError("channel_sum expects NCHW features");
  Tensor out({features.dim(0), features.dim(2), features.dim(3)});
  for (int n = 0; n < features.dim(0); ++n)
    for (int i = 0; i < features.dim(2); ++i)
      for (int j = 0; j < features.dim(3); ++j) {
        Scalar s = 0;
        for (int k = 0; k < features.dim(1); ++k) s += features.at(n, k, i, j);
        out[(static_cast<std::size_t>(n) * features.dim(2) + i) * features.dim(3) + j] = s;
      }
  return out;
}

Tensor apply_spatial_mask(const Tensor& features, std::span<const std::uint8_t> mask) {
  check_mask_span(features, mask);
  Tensor out(features.shape());
  const int h = features.dim(2), w = features.dim(3);
  for (int n = 0; n < features.dim(0); ++n)
    for (int k = 0; k < features.dim(1); ++k)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
          const Scalar keep = 1 - static_cast<Scalar>(mask[(static_cast<std::size_t>(n) * h + i) * w + j]);
          out.at(n, k, i, j) = keep * features.at(n, k, i, j);
        }
  return out;
}

}  // namespace reference

}  // namespace feasc
