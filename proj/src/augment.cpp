#include "feasc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "feasc/image.hpp"

namespace feasc {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must be in [0, 1], got " + std::to_string(p));
}

void check_rgb(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ValidationError("expected a (3, H, W) image, got " + image.shape_string());
}

void clamp_unit(Tensor& t) {
  for (auto& v : t.values()) v = std::clamp(v, 0.0, 1.0);
}

double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

// Per-pixel blend toward `base`: out = base + factor * (x - base).
template <class Base>
Tensor blend(const Tensor& image, double factor, Base base) {
  Tensor out(image.shape());
  const std::size_t plane = static_cast<std::size_t>(image.dim(1)) * image.dim(2);
  for (std::size_t i = 0; i < plane; ++i) {
    const double b = base(i);
    for (int c = 0; c < 3; ++c) out[c * plane + i] = b + factor * (image[c * plane + i] - b);
  }
  clamp_unit(out);
  return out;
}

double gray_at(const Tensor& image, std::size_t i) {
  const std::size_t plane = static_cast<std::size_t>(image.dim(1)) * image.dim(2);
  return luma(image[i], image[plane + i], image[2 * plane + i]);
}

void random_resized_crop(const Tensor& image, const AugmentPolicy& p, Rng& rng, AppliedTransforms& ops) {
  const double h = image.dim(1), w = image.dim(2);
  const double log_lo = std::log(p.crop_ratio_min), log_hi = std::log(p.crop_ratio_max);
  const bool full_image = p.crop_scale_min == 1.0 && w / h >= p.crop_ratio_min && w / h <= p.crop_ratio_max;
  for (int attempt = 0; attempt < 10 && !full_image; ++attempt) {
    const double area = h * w * rng.uniform(p.crop_scale_min, p.crop_scale_max);
    const double ratio = std::exp(rng.uniform(log_lo, log_hi));
    const double cw = std::sqrt(area * ratio), ch = std::sqrt(area / ratio);
    if (cw <= w && ch <= h) {
      ops.crop_top = rng.uniform(0, h - ch);
      ops.crop_left = rng.uniform(0, w - cw);
      ops.crop_height = ch;
      ops.crop_width = cw;
      return;
    }
  }
  // Central crop at the nearest admissible aspect ratio.
  double cw = w, ch = h;
  if (w / h < p.crop_ratio_min)
    ch = w / p.crop_ratio_min;
  else if (w / h > p.crop_ratio_max)
    cw = h * p.crop_ratio_max;
  ops.crop_top = (h - ch) / 2;
  ops.crop_left = (w - cw) / 2;
  ops.crop_height = ch;
  ops.crop_width = cw;
}

Tensor flip_horizontal(const Tensor& image) {
  Tensor out(image.shape());
  const int channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[(static_cast<std::size_t>(c) * h + y) * w + x] = image[(static_cast<std::size_t>(c) * h + y) * w + (w - 1 - x)];
  return out;
}

}  // namespace

void AugmentPolicy::validate() const {
  if (!(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0))
    throw ValidationError("crop scale range must satisfy 0 < min <= max <= 1");
  if (!(crop_ratio_min > 0.0 && crop_ratio_min <= crop_ratio_max)) throw ValidationError("invalid crop aspect-ratio range");
  check_probability(flip_p, "flip_p");
  check_probability(jitter_p, "jitter_p");
  check_probability(grayscale_p, "grayscale_p");
  check_probability(blur_p, "blur_p");
  if (brightness < 0 || contrast < 0 || saturation < 0) throw ValidationError("jitter strengths must be non-negative");
  if (!(hue >= 0 && hue <= 0.5)) throw ValidationError("hue jitter must be in [0, 0.5]");
  if (!(blur_sigma_min > 0 && blur_sigma_min <= blur_sigma_max)) throw ValidationError("invalid blur sigma range");
  if (resolution < 32) throw ValidationError("output resolution must be >= 32, got " + std::to_string(resolution));
}

AugmentPolicy AugmentPolicy::identity(int resolution) {
  AugmentPolicy p;
  p.crop_scale_min = p.crop_scale_max = 1.0;
  p.crop_ratio_min = 1e-9;
  p.crop_ratio_max = 1e9;
  p.flip_p = p.jitter_p = p.grayscale_p = p.blur_p = 0.0;
  p.resolution = resolution;
  return p;
}

AugmentPolicy AugmentPolicy::crop_flip(int resolution) {
  AugmentPolicy p;
  p.crop_scale_min = 0.08;
  p.jitter_p = p.grayscale_p = p.blur_p = 0.0;
  p.resolution = resolution;
  return p;
}

Tensor sample_view(const Tensor& image, const AugmentPolicy& policy, Rng& rng, AppliedTransforms* ops_out) {
  check_rgb(image);
  policy.validate();
  AppliedTransforms ops;
  random_resized_crop(image, policy, rng, ops);
  const int r = policy.resolution;
  Tensor view = crop_resize(image, ops.crop_top, ops.crop_left, ops.crop_height, ops.crop_width, r, r);

  ops.flipped = rng.bernoulli(policy.flip_p);
  if (ops.flipped) view = flip_horizontal(view);

  ops.jittered = rng.bernoulli(policy.jitter_p);
  if (ops.jittered) {
    auto factor = [&](double s) { return rng.uniform(std::max(0.0, 1 - s), 1 + s); };
    ops.jitter_factors = {factor(policy.brightness), factor(policy.contrast), factor(policy.saturation),
                          rng.uniform(-policy.hue, policy.hue)};
    std::array<int, 4> order{0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    for (int op : order) {
      const double f = ops.jitter_factors[op];
      switch (op) {
        case 0: view = color::adjust_brightness(view, f); break;
        case 1: view = color::adjust_contrast(view, f); break;
        case 2: view = color::adjust_saturation(view, f); break;
        default: view = color::adjust_hue(view, f); break;
      }
    }
  }

  ops.grayscale = rng.bernoulli(policy.grayscale_p);
  if (ops.grayscale) view = color::to_grayscale(view);

  ops.blurred = rng.bernoulli(policy.blur_p);
  if (ops.blurred) {
    ops.blur_sigma = rng.uniform(policy.blur_sigma_min, policy.blur_sigma_max) * r / 224.0;
    view = color::gaussian_blur(view, ops.blur_sigma);
  }
  if (ops_out) *ops_out = ops;
  return view;
}

ViewPair sample_view_pair(const Tensor& image, const AugmentPolicy& policy, std::uint64_t seed) {
  ViewPair pair;
  Rng first(derive_seed(seed, 1)), second(derive_seed(seed, 2));
  pair.first = sample_view(image, policy, first, &pair.first_ops);
  pair.second = sample_view(image, policy, second, &pair.second_ops);
  return pair;
}

std::uint64_t view_seed(std::uint64_t global_seed, int epoch, std::size_t sample_index) {
  return derive_seed(global_seed, static_cast<std::uint64_t>(epoch), sample_index);
}

Tensor center_view(const Tensor& image, int resolution, double crop_fraction) {
  check_rgb(image);
  if (resolution < 1 || !(crop_fraction > 0 && crop_fraction <= 1)) throw ValidationError("invalid centre-crop settings");
  const double h = image.dim(1), w = image.dim(2);
  const double side = std::min(h, w) * crop_fraction;
  return crop_resize(image, (h - side) / 2, (w - side) / 2, side, side, resolution, resolution);
}

namespace color {

Tensor adjust_brightness(const Tensor& image, double factor) {
  return blend(image, factor, [](std::size_t) { return 0.0; });
}

Tensor adjust_contrast(const Tensor& image, double factor) {
  const std::size_t plane = static_cast<std::size_t>(image.dim(1)) * image.dim(2);
  double mean = 0;
  for (std::size_t i = 0; i < plane; ++i) mean += gray_at(image, i);
  mean /= static_cast<double>(plane);
  return blend(image, factor, [mean](std::size_t) { return mean; });
}

Tensor adjust_saturation(const Tensor& image, double factor) {
  return blend(image, factor, [&image](std::size_t i) { return gray_at(image, i); });
}

Tensor adjust_hue(const Tensor& image, double shift) {
  Tensor out(image.shape());
  const std::size_t plane = static_cast<std::size_t>(image.dim(1)) * image.dim(2);
  for (std::size_t i = 0; i < plane; ++i) {
    const double r = image[i], g = image[plane + i], b = image[2 * plane + i];
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
    double hue = 0;
    if (d > 0) {
      if (mx == r)
        hue = std::fmod((g - b) / d, 6.0);
      else if (mx == g)
        hue = (b - r) / d + 2;
      else
        hue = (r - g) / d + 4;
      hue /= 6;
    }
    hue = hue + shift;
    hue -= std::floor(hue);
    const double s = mx > 0 ? d / mx : 0, v = mx;
    const double h6 = hue * 6;
    const int sector = static_cast<int>(h6) % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double rgb[3];
    switch (sector) {
      case 0: rgb[0] = v, rgb[1] = t, rgb[2] = p; break;
      case 1: rgb[0] = q, rgb[1] = v, rgb[2] = p; break;
      case 2: rgb[0] = p, rgb[1] = v, rgb[2] = t; break;
      case 3: rgb[0] = p, rgb[1] = q, rgb[2] = v; break;
      case 4: rgb[0] = t, rgb[1] = p, rgb[2] = v; break;
      default: rgb[0] = v, rgb[1] = p, rgb[2] = q; break;
    }
    for (int c = 0; c < 3; ++c) out[c * plane + i] = rgb[c];
  }
  clamp_unit(out);
  return out;
}

Tensor to_grayscale(const Tensor& image) {
  return blend(image, 0.0, [&image](std::size_t i) { return gray_at(image, i); });
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
  if (!(sigma > 0)) throw ValidationError("blur sigma must be positive");
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double norm = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (auto& k : kernel) k /= norm;

  const int channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  };
  Tensor tmp(image.shape()), out(image.shape());
  for (int c = 0; c < channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * image[base + y * w + reflect(x + k, w)];
        tmp[base + y * w + x] = s;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp[base + reflect(y + k, h) * w + x];
        out[base + y * w + x] = s;
      }
  }
  clamp_unit(out);
  return out;
}

}  // namespace color

}  // namespace feasc
