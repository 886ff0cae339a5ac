#include <cmath>
#include <sstream>

#include "doctest.h"
#include "feasc/suppression.hpp"
#include "oracles.hpp"

using namespace feasc;

namespace {

FeatureMap random_feature_map(int c, int h, int w, Rng& rng) {
  FeatureMap f(c, h, w);
  for (auto& v : f.values) v = rng.uniform(-2, 2);
  return f;
}

ResponseMap grid(int h, int w, std::vector<double> v) { return ResponseMap{h, w, std::move(v)}; }

}  // namespace

TEST_CASE("response map of zeros is zero") {
  FeatureMap f(8, 4, 4);
  const auto m = compute_response_map(f);
  CHECK(m.height == 4);
  CHECK(m.width == 4);
  for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("response map sums two equal channels") {
  FeatureMap f(2, 2, 2);
  f.values = {1, 2, 3, 4, 1, 2, 3, 4};
  const auto m = compute_response_map(f);
  CHECK(m.values == std::vector<double>{2, 4, 6, 8});
}

TEST_CASE("response map matches loop oracle on random input") {
  Rng rng(7);
  const auto f = random_feature_map(16, 7, 7, rng);
  const auto m = compute_response_map(f);
  CHECK(m.values == oracle::channel_sum(f.values, 16, 7, 7));
}

TEST_CASE("non-finite feature value is reported with its index") {
  FeatureMap f(3, 2, 2);
  f.at(2, 1, 0) = std::nan("");
  try {
    compute_response_map(f);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("k=2, i=1, j=0") != std::string::npos);
  }
}

TEST_CASE("ramp-up schedule values") {
  const RampSchedule s{0.2, 20};
  CHECK(ramp_up_eta(20, s) == 0.2);
  CHECK(ramp_up_eta(0, s) == doctest::Approx(1.34759e-3).epsilon(1e-5));
  CHECK(ramp_up_eta(100, s) == 0.2);
  const RampSchedule t{0.7, 3};
  CHECK(ramp_up_eta(t.beta, t) == t.alpha);
  CHECK_THROWS_AS(ramp_up_eta(-1, s), ValidationError);
  CHECK_THROWS_AS(ramp_up_eta(0, RampSchedule{0.0, 20}), ValidationError);
  CHECK_THROWS_AS(ramp_up_eta(0, RampSchedule{0.2, 0}), ValidationError);
}

TEST_CASE("ramp-up is monotone on [0, 3 beta] and continuous at beta") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const RampSchedule s{rng.uniform(0.01, 1.0), 1 + static_cast<int>(rng.index(40))};
    double prev = 0;
    for (int e = 0; e <= 3 * s.beta; ++e) {
      const double eta = ramp_up_eta(e, s);
      CHECK(eta >= prev);
      CHECK(eta > 0);
      CHECK(eta <= s.alpha);
      prev = eta;
    }
    // left limit of the exponential branch at e = beta equals alpha exactly
    CHECK(s.alpha * std::exp(-5.0 * 0.0) == ramp_up_eta(s.beta, s));
  }
}

TEST_CASE("build_mask edge ratios") {
  const auto m = grid(2, 2, {1, 2, 3, 4});
  const auto none = build_mask(m, 0.0);
  CHECK(none.count_suppressed == 0);
  for (auto v : none.values) CHECK(v == 0);
  const auto all = build_mask(m, 1.0);
  CHECK(all.count_suppressed == 4);
  for (auto v : all.values) CHECK(v == 1);
  CHECK_THROWS_AS(build_mask(m, -0.1), ValidationError);
  CHECK_THROWS_AS(build_mask(m, 1.1), ValidationError);
}

TEST_CASE("build_mask picks the strongest response") {
  const auto m = grid(2, 2, {1, 2, 3, 4});
  const auto mask = build_mask(m, 0.25);
  CHECK(mask.values == oracle::rank_select(m.values, 1, true));
  CHECK(mask.values == std::vector<std::uint8_t>{0, 0, 0, 1});
  CHECK(mask_threshold(m, mask) == 4.0);
}

TEST_CASE("ties are broken by row-major order") {
  const auto m = grid(2, 2, {5, 5, 5, 5});
  CHECK(build_mask(m, 0.5).values == std::vector<std::uint8_t>{1, 1, 0, 0});
  CHECK(mask_low_response(m, 0.5).values == std::vector<std::uint8_t>{1, 1, 0, 0});
  const auto tie = grid(1, 4, {1, 3, 3, 0});
  CHECK(build_mask(tie, 0.25).values == std::vector<std::uint8_t>{0, 1, 0, 0});
}

TEST_CASE("low-response mask") {
  const auto m = grid(2, 2, {1, 2, 3, 4});
  CHECK(mask_low_response(m, 0.25).values == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(mask_low_response(m, 0.0).count_suppressed == 0);
  CHECK_THROWS_AS(mask_low_response(m, 2.0), ValidationError);

  // complement property on distinct 2x2 maps, every permutation of values
  std::vector<double> v{0.5, -1.0, 3.0, 2.0};
  std::sort(v.begin(), v.end());
  do {
    const auto r = grid(2, 2, v);
    const auto hi = build_mask(r, 0.5);
    const auto lo = mask_low_response(r, 0.5);
    for (int p = 0; p < 4; ++p) CHECK(lo.values[p] == 1 - hi.values[p]);
  } while (std::next_permutation(v.begin(), v.end()));
}

TEST_CASE("random mask count and determinism") {
  const auto zero = mask_random(8, 8, 0.0, 3);
  CHECK(zero.count_suppressed == 0);
  const auto full = mask_random(8, 8, 1.0, 3);
  CHECK(full.count_suppressed == 64);
  const auto a = mask_random(8, 8, 0.2, 42);
  const auto b = mask_random(8, 8, 0.2, 42);
  CHECK(a.count_suppressed == 13);
  int ones = 0;
  for (auto v : a.values) ones += v;
  CHECK(ones == 13);
  CHECK(a.values == b.values);
  CHECK(mask_random(8, 8, 0.2, 43).values != a.values);
  CHECK_THROWS_AS(mask_random(8, 8, -0.5, 1), ValidationError);
}

TEST_CASE("random mask is roughly uniform over cells") {
  std::vector<int> hits(16, 0);
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const auto m = mask_random(4, 4, 0.25, static_cast<std::uint64_t>(t));
    for (int p = 0; p < 16; ++p) hits[p] += m.values[p];
  }
  // each cell is chosen with probability 1/4; binomial sd ~ 27
  for (int h : hits) CHECK(std::abs(h - trials / 4) < 5 * 28);
}

TEST_CASE("suppression identity, annihilation and loop oracle") {
  Rng rng(5);
  const auto f = random_feature_map(4, 3, 3, rng);
  SuppressionMask none{3, 3, std::vector<std::uint8_t>(9, 0), 0};
  CHECK(suppress_features(f, none).values == f.values);
  SuppressionMask all{3, 3, std::vector<std::uint8_t>(9, 1), 9};
  for (double v : suppress_features(f, all).values) CHECK(v == 0.0);

  SuppressionMask corner{3, 3, std::vector<std::uint8_t>(9, 0), 1};
  corner.values[0] = 1;
  const auto out = suppress_features(f, corner);
  CHECK(out.values == oracle::masked_product(f.values, corner.values, 4, 3, 3));
  for (int k = 0; k < 4; ++k) {
    CHECK(out.at(k, 0, 0) == 0.0);
    CHECK(out.at(k, 1, 2) == f.at(k, 1, 2));
  }

  SuppressionMask wrong{2, 3, std::vector<std::uint8_t>(6, 0), 0};
  CHECK_THROWS_AS(suppress_features(f, wrong), ValidationError);
}

TEST_CASE("property: mask count exactness and threshold consistency") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = 1 + static_cast<int>(rng.index(64));
    const int w = 1 + static_cast<int>(rng.index(64));
    const double eta = rng.uniform();
    ResponseMap m{h, w, std::vector<double>(static_cast<std::size_t>(h) * w)};
    for (auto& v : m.values) v = rng.uniform(-10, 10);
    const int expected = oracle::round_half_away(eta * h * w);
    for (const auto& mask : {build_mask(m, eta), mask_low_response(m, eta), mask_random(h, w, eta, trial)}) {
      int ones = 0;
      for (auto v : mask.values) ones += v;
      CHECK(ones == expected);
      CHECK(mask.count_suppressed == expected);
    }
    const auto mask = build_mask(m, eta);
    double min_marked = INFINITY, max_unmarked = -INFINITY;
    for (std::size_t p = 0; p < m.values.size(); ++p) {
      if (mask.values[p]) min_marked = std::min(min_marked, m.values[p]);
      else max_unmarked = std::max(max_unmarked, m.values[p]);
    }
    CHECK(min_marked >= max_unmarked);
  }
}

TEST_CASE("property: locate-mask-suppress keeps unmarked values bit-exact") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 1 + static_cast<int>(rng.index(16)), h = 1 + static_cast<int>(rng.index(12)),
              w = 1 + static_cast<int>(rng.index(12));
    const auto f = random_feature_map(c, h, w, rng);
    const auto mask = build_mask(compute_response_map(f), rng.uniform());
    const auto out = suppress_features(f, mask);
    for (int k = 0; k < c; ++k)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) CHECK(out.at(k, i, j) == (mask.at(i, j) ? 0.0 : f.at(k, i, j)));
  }
}

TEST_CASE("batched masks match per-sample masks") {
  Rng rng(3);
  Tensor batch = oracle::random_tensor({3, 5, 4, 6}, rng);
  const auto masks = build_batch_masks(batch, 0.3, MaskSource::high_response);
  const auto suppressed = suppress_batch(batch, masks);
  for (int n = 0; n < 3; ++n) {
    FeatureMap f(5, 4, 6);
    std::copy(batch.slice(n).begin(), batch.slice(n).end(), f.values.begin());
    const auto single = build_mask(compute_response_map(f), 0.3);
    CHECK(single.values == masks[n].values);
    const auto out = suppress_features(f, single);
    CHECK(std::equal(out.values.begin(), out.values.end(), suppressed.slice(n).begin()));
  }
  const auto random_a = build_batch_masks(batch, 0.3, MaskSource::random, 9);
  const auto random_b = build_batch_masks(batch, 0.3, MaskSource::random, 9);
  for (int n = 0; n < 3; ++n) CHECK(random_a[n].values == random_b[n].values);
}

TEST_CASE("gradient through suppression: zero at marked cells, finite differences elsewhere") {
  Rng rng(17);
  Tensor f = oracle::random_tensor({2, 3, 4, 4}, rng);
  const Tensor weights = oracle::random_tensor({2, 3, 4, 4}, rng);
  const double eta = 0.25;
  // L(F) = sum w * sin(F_hat), mask recomputed from F on every evaluation
  auto loss = [&]() {
    const auto masks = build_batch_masks(f, eta, MaskSource::high_response);
    const Tensor fh = suppress_batch(f, masks);
    double s = 0;
    for (std::size_t i = 0; i < fh.size(); ++i) s += weights[i] * std::sin(fh[i]);
    return s;
  };
  const auto masks = build_batch_masks(f, eta, MaskSource::high_response);
  const Tensor fh = suppress_batch(f, masks);
  Tensor grad_hat(f.shape());
  for (std::size_t i = 0; i < fh.size(); ++i) grad_hat[i] = weights[i] * std::cos(fh[i]);
  const Tensor grad = suppress_batch(grad_hat, masks);

  for (int n = 0; n < 2; ++n)
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const double g = grad.at(n, k, i, j);
          if (masks[n].at(i, j)) {
            CHECK(g == 0.0);
          } else {
            const double fd = oracle::central_difference(loss, f.at(n, k, i, j));
            CHECK(oracle::close_relative(g, fd, 1e-4));
          }
        }
}

TEST_CASE("debug grids round-trip with a three-integer header") {
  Rng rng(8);
  ResponseMap m{3, 5, std::vector<double>(15)};
  for (auto& v : m.values) v = static_cast<float>(rng.uniform(-4, 4));
  std::stringstream ss;
  write_grid(ss, m);
  CHECK(ss.str().size() == 12 + 15 * 4);
  const auto back = read_response_grid(ss);
  CHECK(back.values == m.values);

  const auto mask = build_mask(m, 0.4);
  std::stringstream ms;
  write_grid(ms, mask);
  const std::string bytes = ms.str();
  CHECK(bytes.size() == 12 + 15);
  CHECK(bytes[4] == 3);  // height, little-endian
  CHECK(bytes[8] == 5);  // width
  const auto mback = read_mask_grid(ms);
  CHECK(mback.values == mask.values);
  CHECK(mback.count_suppressed == mask.count_suppressed);
}
