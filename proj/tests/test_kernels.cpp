#include "doctest.h"
#include "feasc/kernels.hpp"
#include "oracles.hpp"

using namespace feasc;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("parallel conv matches the direct serial convolution") {
  Rng rng(1);
  struct Case {
    int n, ci, co, k, stride, pad, h, w;
  };
  for (const Case c : {Case{2, 3, 4, 3, 1, 1, 7, 6}, Case{3, 2, 5, 3, 2, 1, 9, 9}, Case{1, 4, 2, 1, 1, 0, 5, 3},
                       Case{2, 1, 3, 5, 2, 2, 8, 11}}) {
    const Conv2dGeometry g{c.ci, c.co, c.k, c.stride, c.pad};
    const Tensor x = oracle::random_tensor({c.n, c.ci, c.h, c.w}, rng);
    const Tensor wt = oracle::random_tensor({c.co, c.ci, c.k, c.k}, rng);
    Tensor cols;
    const Tensor y = kernels::conv2d_forward(x, wt, g, &cols);
    const Tensor y_ref = reference::conv2d_forward(x, wt, g);
    CHECK(max_abs_diff(y, y_ref) < 1e-12);

    const Tensor gy = oracle::random_tensor(y.shape(), rng);
    Tensor gw(wt.shape()), gw_ref(wt.shape()), gx;
    kernels::conv2d_backward(gy, cols, wt, g, x.shape(), &gx, gw);
    const Tensor gx_ref = reference::conv2d_backward(x, gy, wt, g, gw_ref);
    CHECK(max_abs_diff(gx, gx_ref) < 1e-12);
    CHECK(max_abs_diff(gw, gw_ref) < 1e-12);
  }
}

TEST_CASE("conv rejects mismatched weights") {
  Rng rng(2);
  const Tensor x = oracle::random_tensor({1, 3, 5, 5}, rng);
  const Tensor wt = oracle::random_tensor({4, 2, 3, 3}, rng);
  CHECK_THROWS_AS(kernels::conv2d_forward(x, wt, Conv2dGeometry{3, 4, 3, 1, 1}), ValidationError);
}

TEST_CASE("channel sum and spatial mask agree with the serial reference") {
  Rng rng(3);
  const Tensor f = oracle::random_tensor({4, 6, 5, 7}, rng);
  CHECK(max_abs_diff(kernels::channel_sum(f), reference::channel_sum(f)) == 0.0);
  std::vector<std::uint8_t> mask(4 * 5 * 7);
  for (auto& m : mask) m = rng.bernoulli(0.3) ? 1 : 0;
  CHECK(max_abs_diff(kernels::apply_spatial_mask(f, mask), reference::apply_spatial_mask(f, mask)) == 0.0);
  CHECK_THROWS_AS(kernels::apply_spatial_mask(f, std::span<const std::uint8_t>(mask).first(10)), ValidationError);
}

TEST_CASE("batchnorm output has zero mean and unit variance per channel") {
  Rng rng(4);
  const Tensor x = oracle::random_tensor({5, 3, 4, 4}, rng, -3, 5);
  Tensor gamma({3}, 1.0), beta({3}, 0.0), x_hat;
  std::vector<Scalar> mean, inv_std;
  const Tensor y = kernels::batchnorm_forward(x, gamma, beta, 0.0, mean, inv_std, x_hat);
  for (int c = 0; c < 3; ++c) {
    double s = 0, sq = 0;
    for (int n = 0; n < 5; ++n)
      for (int i = 0; i < 16; ++i) {
        const double v = y[(static_cast<std::size_t>(n) * 3 + c) * 16 + i];
        s += v;
        sq += v * v;
      }
    CHECK(std::abs(s / 80) < 1e-12);
    CHECK(sq / 80 == doctest::Approx(1.0).epsilon(1e-12));
  }
}
