#pragma once

#include <array>
#include <cstdint>

#include "feasc/rng.hpp"
#include "feasc/tensor.hpp"

namespace feasc {

struct AugmentPolicy {
  double crop_scale_min = 0.2;
  double crop_scale_max = 1.0;
  double crop_ratio_min = 3.0 / 4.0;
  double crop_ratio_max = 4.0 / 3.0;
  double flip_p = 0.5;
  double jitter_p = 0.8;
  double brightness = 0.4;
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;
  double grayscale_p = 0.2;
  double blur_p = 0.5;
  // Blur sigma range in pixels at a 224-pixel output; scaled to `resolution`.
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  int resolution = 64;

  void validate() const;

  /// Full-image resize with every random transform disabled.
  static AugmentPolicy identity(int resolution);
  /// Random resized crop + horizontal flip only (probe training).
  static AugmentPolicy crop_flip(int resolution);
};

/// Record of the transforms drawn for one view.
struct AppliedTransforms {
  double crop_top = 0, crop_left = 0, crop_height = 0, crop_width = 0;
  bool flipped = false;
  bool jittered = false;
  std::array<double, 4> jitter_factors{1, 1, 1, 0};  // brightness, contrast, saturation, hue shift
  bool grayscale = false;
  bool blurred = false;
  double blur_sigma = 0;
};

struct ViewPair {
  Tensor first, second;
  AppliedTransforms first_ops, second_ops;
};

/// Draws one augmented view of a CHW image.
Tensor sample_view(const Tensor& image, const AugmentPolicy& policy, Rng& rng, AppliedTransforms* ops = nullptr);

/// Two independently drawn views. Deterministic given (image, seed).
ViewPair sample_view_pair(const Tensor& image, const AugmentPolicy& policy, std::uint64_t seed);

/// Per-sample seed for training: hash of (global seed, epoch, sample index).
std::uint64_t view_seed(std::uint64_t global_seed, int epoch, std::size_t sample_index);

/// Resize the shorter side to resolution/crop_fraction, then take the central
/// resolution x resolution crop.
Tensor center_view(const Tensor& image, int resolution, double crop_fraction = 0.875);

namespace color {
Tensor adjust_brightness(const Tensor& image, double factor);
Tensor adjust_contrast(const Tensor& image, double factor);
Tensor adjust_saturation(const Tensor& image, double factor);
/// shift in [-0.5, 0.5] turns of the hue circle.
Tensor adjust_hue(const Tensor& image, double shift);
Tensor to_grayscale(const Tensor& image);
Tensor gaussian_blur(const Tensor& image, double sigma);
}  // namespace color

}  // namespace feasc
