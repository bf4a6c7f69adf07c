#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

// Row-major pixel grid with 1 or 3 interleaved channels, values in [0, 1].
class RasterImage {
 public:
  RasterImage() = default;

  RasterImage(int width, int height, int channels, double fill = 0.0)
      : RasterImage(width, height, channels,
                    std::vector<double>(std::size_t(std::max(width, 0)) *
                                            std::size_t(std::max(height, 0)) *
                                            std::size_t(std::max(channels, 0)),
                                        fill)) {}

  RasterImage(int width, int height, int channels, std::vector<double> pixels)
      : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw DataError("raster dimensions must be positive");
    if (channels != 1 && channels != 3) throw DataError("raster must have 1 or 3 channels");
    if (pixels_.size() != std::size_t(width) * std::size_t(height) * std::size_t(channels)) {
      throw DataError("raster pixel count does not match its dimensions");
    }
    for (double v : pixels_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw DataError("raster pixel values must be finite and in [0, 1]");
      }
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::span<const double> pixels() const noexcept { return pixels_; }

  double at(int x, int y, int c = 0) const noexcept {
    return pixels_[(std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(channels_) +
                   std::size_t(c)];
  }

  // Edge-replicated access.
  double clamped(int x, int y, int c = 0) const noexcept {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1), c);
  }

  void set(int x, int y, int c, double v) noexcept {
    pixels_[(std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(channels_) +
            std::size_t(c)] = v;
  }

  // Pixels [x0, x1) x [y0, y1), clipped to the image.
  RasterImage crop(int x0, int y0, int x1, int y1) const {
    x0 = std::clamp(x0, 0, width_);
    x1 = std::clamp(x1, 0, width_);
    y0 = std::clamp(y0, 0, height_);
    y1 = std::clamp(y1, 0, height_);
    if (x1 <= x0 || y1 <= y0) throw DataError("empty crop region");
    RasterImage out(x1 - x0, y1 - y0, channels_);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        for (int c = 0; c < channels_; ++c) out.set(x - x0, y - y0, c, at(x, y, c));
      }
    }
    return out;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<double> pixels_;
};

// Integer pixel span covered by a continuous box: [floor(min), ceil(max)).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
};

inline PixelRect pixel_rect(const BoundingBox& b, int width, int height) {
  PixelRect r{static_cast<int>(std::floor(b.x_min)), static_cast<int>(std::floor(b.y_min)),
              static_cast<int>(std::ceil(b.x_max)), static_cast<int>(std::ceil(b.y_max))};
  r.x0 = std::clamp(r.x0, 0, width);
  r.x1 = std::clamp(r.x1, 0, width);
  r.y0 = std::clamp(r.y0, 0, height);
  r.y1 = std::clamp(r.y1, 0, height);
  if (r.width() <= 0 || r.height() <= 0) throw DataError("box covers no pixels of the image");
  return r;
}

}  // namespace dshift
