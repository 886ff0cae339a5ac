#include <cmath>
#include <fstream>

#include "doctest.h"
#include "feasc/augment.hpp"
#include "feasc/image.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace feasc;

namespace {

Tensor test_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  return oracle::random_tensor({3, h, w}, rng, 0.0, 1.0);
}

bool identical(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("identity policy returns the resized input for both views") {
  const Tensor x = test_image(48, 40, 1);
  const ViewPair pair = sample_view_pair(x, AugmentPolicy::identity(32), 7);
  const Tensor resized = resize(x, 32, 32);
  CHECK(identical(pair.first, resized));
  CHECK(identical(pair.second, resized));
  CHECK_FALSE(pair.first_ops.flipped);
  CHECK(pair.first_ops.crop_height == 48.0);
  CHECK(pair.first_ops.crop_width == 40.0);
}

TEST_CASE("view pairs are deterministic per seed and differ across seeds") {
  const Tensor x = test_image(64, 64, 2);
  const AugmentPolicy policy;
  const ViewPair a = sample_view_pair(x, policy, 123);
  const ViewPair b = sample_view_pair(x, policy, 123);
  CHECK(identical(a.first, b.first));
  CHECK(identical(a.second, b.second));
  CHECK(a.first.shape() == std::vector<int>{3, 64, 64});

  const ViewPair c = sample_view_pair(x, policy, 124);
  CHECK_FALSE(identical(a.first, c.first));
  CHECK_FALSE(identical(a.first, a.second));
}

TEST_CASE("outputs stay in [0, 1] for extreme policies") {
  Rng rng(3);
  const Tensor x = test_image(40, 50, 3);
  for (int trial = 0; trial < 60; ++trial) {
    AugmentPolicy p;
    p.crop_scale_min = rng.uniform(0.01, 1.0);
    p.crop_scale_max = rng.uniform(p.crop_scale_min, 1.0);
    p.flip_p = rng.uniform();
    p.jitter_p = rng.uniform();
    p.brightness = rng.uniform(0, 3);
    p.contrast = rng.uniform(0, 3);
    p.saturation = rng.uniform(0, 3);
    p.hue = rng.uniform(0, 0.5);
    p.grayscale_p = rng.uniform();
    p.blur_p = rng.uniform();
    p.blur_sigma_max = rng.uniform(p.blur_sigma_min, 20.0);
    p.resolution = 32;
    Rng view_rng(trial);
    const Tensor v = sample_view(x, p, view_rng);
    for (double value : v.values()) REQUIRE((value >= 0.0 && value <= 1.0));
  }
}

TEST_CASE("empirical flip frequency is within three sigma of the policy") {
  const Tensor x = test_image(16, 16, 4);
  for (double p_flip : {0.5, 0.2}) {
    AugmentPolicy p;
    p.flip_p = p_flip;
    p.resolution = 32;
    int flips = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      Rng rng(view_seed(9, 0, i));
      AppliedTransforms ops;
      sample_view(x, p, rng, &ops);
      flips += ops.flipped;
    }
    const double sigma = std::sqrt(n * p_flip * (1 - p_flip));
    CHECK(std::abs(flips - n * p_flip) <= 3 * sigma);
  }
}

TEST_CASE("policy validation") {
  AugmentPolicy p;
  p.resolution = 16;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = AugmentPolicy{};
  p.flip_p = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = AugmentPolicy{};
  p.crop_scale_min = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = AugmentPolicy{};
  p.crop_scale_max = 1.2;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_NOTHROW(AugmentPolicy{}.validate());
  CHECK_NOTHROW(AugmentPolicy::crop_flip(32).validate());
}

TEST_CASE("colour operations") {
  const Tensor x = test_image(8, 8, 5);
  CHECK(identical(color::adjust_brightness(x, 1.0), x));
  const Tensor hue0 = color::adjust_hue(x, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(hue0[i] == doctest::Approx(x[i]).epsilon(1e-12));

  const Tensor g = color::to_grayscale(x);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(g[i] == g[64 + i]);
    CHECK(g[i] == g[128 + i]);
    CHECK(g[i] == doctest::Approx(0.299 * x[i] + 0.587 * x[64 + i] + 0.114 * x[128 + i]));
  }

  Tensor red({3, 1, 1});
  red[0] = 1.0;
  const Tensor green = color::adjust_hue(red, 1.0 / 3.0);
  CHECK(green[0] == doctest::Approx(0.0));
  CHECK(green[1] == doctest::Approx(1.0));

  const Tensor flat({3, 10, 10}, 0.3);
  const Tensor blurred = color::gaussian_blur(flat, 1.7);
  for (double v : blurred.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
  const Tensor low = color::adjust_contrast(flat, 0.0);
  for (double v : low.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("centre crop of a constant image is constant") {
  const Tensor flat({3, 50, 70}, 0.25);
  const Tensor v = center_view(flat, 32);
  CHECK(v.shape() == std::vector<int>{3, 32, 32});
  for (double value : v.values()) CHECK(value == doctest::Approx(0.25));
}

TEST_CASE("per-sample seeds differ by epoch and index") {
  CHECK(view_seed(1, 0, 0) != view_seed(1, 1, 0));
  CHECK(view_seed(1, 0, 0) != view_seed(1, 0, 1));
  CHECK(view_seed(1, 2, 3) == view_seed(1, 2, 3));
}

TEST_CASE("image codec round trip and ingestion errors") {
  testing::TempDir dir;
  const Tensor x = test_image(9, 7, 6);
  const std::string path = (dir / "x.png").string();
  save_image(path, x);
  const Tensor y = load_image(path);
  REQUIRE(y.same_shape(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= 0.5 / 255 + 1e-12);

  const std::string missing = (dir / "missing.png").string();
  try {
    load_image(missing);
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(e.path() == missing);
    CHECK(std::string(e.what()).find(missing) != std::string::npos);
  }
  const std::string garbage = (dir / "garbage.png").string();
  std::ofstream(garbage) << "not an image";
  CHECK_THROWS_AS(load_image(garbage), IngestionError);
}
