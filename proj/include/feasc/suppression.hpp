#pragma once

// Response-aware localization and feature-map suppression.
//
// A feature map F (C x H x W) is reduced to a response map M by summing over
// channels. The top fraction eta of locations by response form the mask Loc,
// and the suppressed map is F_hat = (1 - Loc) * F broadcast over channels.
// All functions are pure; the random strategy takes an explicit seed.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "feasc/tensor.hpp"

namespace feasc {

struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<Scalar> values;  // channel-major, row-major within a channel

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, Scalar fill = 0);

  Scalar& at(int k, int i, int j) { return values[(static_cast<std::size_t>(k) * height + i) * width + j]; }
  Scalar at(int k, int i, int j) const { return values[(static_cast<std::size_t>(k) * height + i) * width + j]; }

  /// Throws ValidationError for bad dimensions or the first non-finite entry (k, i, j).
  void validate() const;
};

struct ResponseMap {
  int height = 0;
  int width = 0;
  std::vector<Scalar> values;

  Scalar at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }
};

/// Binary map, 1 = suppress this location.
struct SuppressionMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;
  int count_suppressed = 0;

  std::uint8_t at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }
};

struct RampSchedule {
  double alpha = 0.2;  // final suppression ratio
  int beta = 20;       // epochs of ramp

  void validate() const;
};

/// Which locations a mask selects.
enum class MaskSource { high_response, low_response, random };

/// round(eta * cells) with halves rounded away from zero.
int suppressed_count(double eta, int cells);

ResponseMap compute_response_map(const FeatureMap& features);

/// eta(e) = alpha * exp(-5 (1 - e/beta)^2) for e < beta, alpha afterwards.
double ramp_up_eta(int epoch, const RampSchedule& schedule);

/// Marks exactly suppressed_count(eta, H*W) highest-response cells.
/// Ties are broken in favour of the smaller row-major index.
SuppressionMask build_mask(const ResponseMap& response, double eta);

/// Mirror of build_mask selecting the lowest responses (same tie rule).
SuppressionMask mask_low_response(const ResponseMap& response, double eta);

/// Uniform choice of suppressed_count(eta, H*W) cells without replacement.
SuppressionMask mask_random(int height, int width, double eta, std::uint64_t seed);

/// Smallest response among marked cells (the percentile threshold omega).
/// Returns +inf for an empty mask.
Scalar mask_threshold(const ResponseMap& response, const SuppressionMask& mask);

FeatureMap suppress_features(const FeatureMap& features, const SuppressionMask& mask);

// Batched forms over NCHW tensors. Masks are computed per sample.

/// (N, C, H, W) -> (N, H, W).
Tensor response_maps(const Tensor& features);

std::vector<SuppressionMask> build_batch_masks(const Tensor& features, double eta, MaskSource source,
                                               std::uint64_t seed = 0);

/// Applies per-sample masks to every channel. Also serves as the backward
/// pass: the mask is a constant, so dL/dF = (1 - Loc) * dL/dF_hat.
Tensor suppress_batch(const Tensor& features, const std::vector<SuppressionMask>& masks);

// Debug grids: int32 little-endian header (channels, height, width) followed by
// row-major payload (float32 for response maps, uint8 for masks).

void write_grid(std::ostream& os, const ResponseMap& response);
void write_grid(std::ostream& os, const SuppressionMask& mask);
ResponseMap read_response_grid(std::istream& is);
SuppressionMask read_mask_grid(std::istream& is);

}  // namespace feasc
