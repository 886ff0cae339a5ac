#include "feasc/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace feasc {

Tensor load_image(const std::string& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw IngestionError(path, e.what());
  }
  if (bgr.empty()) throw IngestionError(path, "cannot decode image");
  Tensor img({3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x)
      for (int c = 0; c < 3; ++c)
        img[(static_cast<std::size_t>(c) * bgr.rows + y) * bgr.cols + x] = row[x][2 - c] / 255.0;
  }
  return img;
}

void save_image(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw ValidationError("save_image expects a (1|3, H, W) tensor, got " + image.shape_string());
  const int channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  cv::Mat out(h, w, channels == 3 ? CV_8UC3 : CV_8UC1);
  auto to_byte = [](Scalar v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (channels == 1) {
        out.at<unsigned char>(y, x) = to_byte(image[static_cast<std::size_t>(y) * w + x]);
      } else {
        auto& px = out.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) px[2 - c] = to_byte(image[(static_cast<std::size_t>(c) * h + y) * w + x]);
      }
    }
  bool ok = false;
  try {
    ok = cv::imwrite(path, out);
  } catch (const cv::Exception& e) {
    throw IngestionError(path, e.what());
  }
  if (!ok) throw IngestionError(path, "cannot write image");
}

Tensor crop_resize(const Tensor& image, double top, double left, double height, double width, int out_h, int out_w) {
  if (image.rank() != 3) throw ValidationError("crop_resize expects a CHW image");
  if (out_h < 1 || out_w < 1 || !(height > 0) || !(width > 0)) throw ValidationError("invalid crop or output size");
  const int channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out({channels, out_h, out_w});
  const double sy = height / out_h, sx = width / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp(top + (oy + 0.5) * sy - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp(left + (ox + 0.5) * sx - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      for (int c = 0; c < channels; ++c) {
        const Scalar* plane = image.data() + static_cast<std::size_t>(c) * h * w;
        const double top_row = plane[y0 * w + x0] * (1 - wx) + plane[y0 * w + x1] * wx;
        const double bottom_row = plane[y1 * w + x0] * (1 - wx) + plane[y1 * w + x1] * wx;
        out[(static_cast<std::size_t>(c) * out_h + oy) * out_w + ox] = top_row * (1 - wy) + bottom_row * wy;
      }
    }
  }
  return out;
}

Tensor upsample_nearest(const Tensor& grid, int out_h, int out_w) {
  if (grid.rank() != 2) throw ValidationError("upsample_nearest expects an (H, W) grid");
  Tensor out({1, out_h, out_w});
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      out[static_cast<std::size_t>(y) * out_w + x] = grid.at(y * grid.dim(0) / out_h, x * grid.dim(1) / out_w);
  return out;
}

}  // namespace feasc
