#pragma once

// Images are CHW tensors with values in [0, 1].

#include <string>

#include "feasc/tensor.hpp"

namespace feasc {

/// Decodes PNG/JPEG to a 3-channel image. Throws IngestionError with the path.
Tensor load_image(const std::string& path);

/// Writes a 1- or 3-channel image as PNG (extension decides the codec).
void save_image(const std::string& path, const Tensor& image);

/// Bilinear resampling of the box [top, top+height) x [left, left+width) to
/// out_h x out_w, sampling at pixel centres with edge clamping.
Tensor crop_resize(const Tensor& image, double top, double left, double height, double width, int out_h, int out_w);

inline Tensor resize(const Tensor& image, int out_h, int out_w) {
  return crop_resize(image, 0, 0, image.dim(1), image.dim(2), out_h, out_w);
}

/// Nearest-neighbour upscaling of a single-channel (H, W) grid to an image.
Tensor upsample_nearest(const Tensor& grid, int out_h, int out_w);

}  // namespace feasc
