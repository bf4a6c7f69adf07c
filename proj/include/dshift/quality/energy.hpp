#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/quality/blur.hpp"
#include "dshift/quality/raster.hpp"

namespace dshift {

inline constexpr int kEnergyCellSize = 8;

struct GradientEnergy {
  double energy = 0.0;
  int cells = 0;
  bool partial_cell_only = false;  // crop smaller than one cell in some direction
};

// Sum of gradient magnitudes inside the box divided by the number of 8x8
// cells it spans (partial cells at the right/bottom count as cells).
// Gradients are [-1, 0, 1] centred differences on the crop with replicated
// crop borders; the per-pixel magnitude is the max over channels.
inline GradientEnergy gradient_energy_detail(const RasterImage& img, const BoundingBox& box) {
  const PixelRect r = pixel_rect(box, img.width(), img.height());
  const int w = r.width();
  const int h = r.height();
  auto px = [&](int x, int y, int c) {
    return img.at(r.x0 + std::clamp(x, 0, w - 1), r.y0 + std::clamp(y, 0, h - 1), c);
  };
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = 0.0;
      for (int c = 0; c < img.channels(); ++c) {
        const double dx = px(x + 1, y, c) - px(x - 1, y, c);
        const double dy = px(x, y + 1, c) - px(x, y - 1, c);
        best = std::max(best, std::sqrt(dx * dx + dy * dy));
      }
      total += best;
    }
  }
  GradientEnergy g;
  g.cells = ((w + kEnergyCellSize - 1) / kEnergyCellSize) * ((h + kEnergyCellSize - 1) / kEnergyCellSize);
  g.energy = total / double(g.cells);
  g.partial_cell_only = w < kEnergyCellSize || h < kEnergyCellSize;
  return g;
}

inline double gradient_energy(const RasterImage& img, const BoundingBox& box) {
  return gradient_energy_detail(img, box).energy;
}

// An image region to be measured: either a whole image or a patch cut from
// one with enough margin that blurring it is identical, inside the box, to
// blurring the full image.
struct BoxedImage {
  std::string sample_id;
  RasterImage image;
  BoundingBox box;  // in `image` coordinates
};

// Largest filter reach used by equalize_energy: ceil(3 * 16) for gaussian,
// 63 left taps for motion.
inline constexpr int kBlurMargin = 64;

inline BoxedImage make_patch(std::string sample_id, const RasterImage& full, const BoundingBox& box,
                             int margin = kBlurMargin) {
  const PixelRect r = pixel_rect(box, full.width(), full.height());
  const int x0 = std::max(0, r.x0 - margin);
  const int y0 = std::max(0, r.y0 - margin);
  const int x1 = std::min(full.width(), r.x1 + margin);
  const int y1 = std::min(full.height(), r.y1 + margin);
  return {std::move(sample_id), full.crop(x0, y0, x1, y1),
          {box.x_min - x0, box.y_min - y0, box.x_max - x0, box.y_max - y0}};
}

struct EnergyReport {
  std::map<std::string, double> per_sample;
  double mean = 0.0;
  std::vector<std::string> partial_cell_samples;
};

inline EnergyReport measure_energy(const std::vector<BoxedImage>& items,
                                   const BlurParam* blur = nullptr) {
  EnergyReport rep;
  double sum = 0.0;
  for (const auto& it : items) {
    const GradientEnergy g = blur ? gradient_energy_detail(apply_blur(it.image, *blur), it.box)
                                  : gradient_energy_detail(it.image, it.box);
    rep.per_sample[it.sample_id] = g.energy;
    if (g.partial_cell_only) rep.partial_cell_samples.push_back(it.sample_id);
    sum += g.energy;
  }
  rep.mean = items.empty() ? 0.0 : sum / double(items.size());
  return rep;
}

struct EnergyEqualization {
  BlurParam param;
  EnergyReport before;
  EnergyReport after;
  int iterations = 0;
  bool saturated = false;
  Warnings warnings;
};

inline constexpr double kEnergyRelTol = 1e-3;
inline constexpr int kBisectionMaxIter = 60;
inline constexpr double kSigmaMax = 16.0;
inline constexpr double kMotionMax = 64.0;

// Finds the blur parameter whose post-blur mean energy equals `target`
// (within kEnergyRelTol relative) by bisection on sigma in [0, 16] or K in
// [1, 64]. Mean energy decreases with the parameter.
inline EnergyEqualization equalize_energy(const std::vector<BoxedImage>& items, double target,
                                          BlurKind kind) {
  if (items.empty()) throw DataError("equalize_energy needs a non-empty image set");
  if (!(target >= 0.0) || !std::isfinite(target)) throw NumericError("invalid energy target");

  EnergyEqualization out;
  double lo = kind == BlurKind::gaussian ? 0.0 : 1.0;
  double hi = kind == BlurKind::gaussian ? kSigmaMax : kMotionMax;
  const double tol = kEnergyRelTol * target;

  out.before = measure_energy(items);
  auto eval = [&](double p) {
    BlurParam bp{kind, p};
    return measure_energy(items, &bp);
  };

  if (std::fabs(out.before.mean - target) <= tol) {
    out.param = {kind, lo};
    out.after = out.before;
    return out;
  }
  if (target > out.before.mean) {
    throw NumericError("target not reachable by blurring: target energy " + format_number(target) +
                       " exceeds current mean " + format_number(out.before.mean));
  }

  EnergyReport at_hi = eval(hi);
  if (at_hi.mean > target + tol) {
    out.param = {kind, hi};
    out.after = std::move(at_hi);
    out.saturated = true;
    out.warnings.push_back("blur saturated at " + std::string(blur_kind_name(kind)) + " " +
                           format_number(hi) + ": mean energy " + format_number(out.after.mean) +
                           " still above target " + format_number(target));
    return out;
  }
  if (std::fabs(at_hi.mean - target) <= tol) {
    out.param = {kind, hi};
    out.after = std::move(at_hi);
    return out;
  }

  double best_p = hi;
  EnergyReport best = std::move(at_hi);
  for (int it = 0; it < kBisectionMaxIter; ++it) {
    const double mid = 0.5 * (lo + hi);
    EnergyReport r = eval(mid);
    ++out.iterations;
    if (std::fabs(r.mean - target) < std::fabs(best.mean - target)) {
      best = r;
      best_p = mid;
    }
    if (std::fabs(r.mean - target) <= tol) break;
    if (r.mean > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.param = {kind, best_p};
  out.after = std::move(best);
  if (std::fabs(out.after.mean - target) > tol) {
    out.warnings.push_back("bisection ended " + format_number(out.after.mean - target) +
                           " away from target energy " + format_number(target));
  }
  return out;
}

}  // namespace dshift
