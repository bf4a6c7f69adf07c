#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/quality/raster.hpp"

namespace dshift {

enum class BlurKind { gaussian, motion };

inline std::string_view blur_kind_name(BlurKind k) {
  return k == BlurKind::gaussian ? "gaussian" : "motion";
}

inline BlurKind parse_blur_kind(std::string_view s) {
  if (s == "gaussian") return BlurKind::gaussian;
  if (s == "motion") return BlurKind::motion;
  throw UsageError("unknown blur kind '" + std::string(s) + "' (expected gaussian or motion)");
}

// sigma in pixels for gaussian; box length K (continuous) for motion.
struct BlurParam {
  BlurKind kind = BlurKind::gaussian;
  double value = 0.0;
};

// Normalized Gaussian taps for offsets -r..r, r = ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(std::size_t(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[std::size_t(i + r)] = std::exp(-double(i) * double(i) / (2.0 * sigma * sigma));
    sum += w[std::size_t(i + r)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Horizontal box taps for offsets 0..-(taps-1): floor(k) taps of 1/k plus one
// tap of frac(k)/k when k is fractional.
inline std::vector<double> motion_kernel(double k) {
  if (!(k >= 1.0) || !std::isfinite(k)) throw DataError("motion blur length must be >= 1");
  const auto full = static_cast<std::size_t>(std::floor(k));
  const double frac = k - double(full);
  std::vector<double> w(full, 1.0 / k);
  if (frac > 0.0) w.push_back(frac / k);
  return w;
}

namespace detail {

// out(x, y) = f(x, y) + sum_t w[t] * (f(x + dx(t), y + dy(t)) - f(x, y)), with
// edge replication. Anchoring on the centre pixel reproduces constant regions
// exactly. Results are clamped to [0, 1].
inline RasterImage anchored_filter_1d(const RasterImage& img, const std::vector<double>& w,
                                      int first_offset, int step, bool horizontal) {
  const int W = img.width();
  const int H = img.height();
  const int C = img.channels();
  std::vector<double> out(img.pixels().size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        const double centre = img.at(x, y, c);
        double acc = 0.0;
        int off = first_offset;
        for (double wt : w) {
          const double v = horizontal ? img.clamped(x + off, y, c) : img.clamped(x, y + off, c);
          acc += wt * (v - centre);
          off += step;
        }
        out[(std::size_t(y) * std::size_t(W) + std::size_t(x)) * std::size_t(C) + std::size_t(c)] =
            std::clamp(centre + acc, 0.0, 1.0);
      }
    }
  }
  return RasterImage(W, H, C, std::move(out));
}

}  // namespace detail

// Separable Gaussian blur (horizontal pass, then vertical). sigma == 0 is the
// identity.
inline RasterImage gaussian_blur(const RasterImage& img, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DataError("gaussian sigma must be >= 0");
  if (sigma == 0.0) return img;
  const auto w = gaussian_kernel(sigma);
  const int r = static_cast<int>(w.size() / 2);
  return detail::anchored_filter_1d(detail::anchored_filter_1d(img, w, -r, 1, true), w, -r, 1,
                                    false);
}

// Horizontal motion blur: g(x, y) = sum_i w_i f(x - i, y) over the taps of
// motion_kernel(k), replicating the left border.
inline RasterImage motion_blur(const RasterImage& img, double k) {
  const auto w = motion_kernel(k);
  if (w.size() == 1) return img;
  return detail::anchored_filter_1d(img, w, 0, -1, true);
}

inline RasterImage apply_blur(const RasterImage& img, const BlurParam& p) {
  return p.kind == BlurKind::gaussian ? gaussian_blur(img, p.value) : motion_blur(img, p.value);
}

}  // namespace dshift
