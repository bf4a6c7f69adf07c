#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/common/text.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

// A detection is correct when its IoU with ground truth is strictly above this.
inline constexpr double kIouThreshold = 0.5;

inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

// Percentage of (candidate, ground truth) pairs with IoU > 0.5. Undefined for
// an empty input.
inline std::optional<double> corloc(
    const std::vector<std::pair<BoundingBox, BoundingBox>>& pairs) {
  if (pairs.empty()) return std::nullopt;
  const auto hits = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) {
    return iou(p.first, p.second) > kIouThreshold;
  });
  return 100.0 * double(hits) / double(pairs.size());
}

struct Detection {
  std::string image_id;
  std::string class_label;
  BoundingBox box;
  double score = 0.0;
};

enum class ApMode { elevenPoint, continuous };

inline std::string_view ap_mode_name(ApMode m) {
  return m == ApMode::elevenPoint ? "elevenPoint" : "continuous";
}

inline ApMode parse_ap_mode(std::string_view s) {
  if (s == "elevenPoint" || s == "11point" || s == "voc07") return ApMode::elevenPoint;
  if (s == "continuous" || s == "area") return ApMode::continuous;
  throw UsageError("unknown AP mode '" + std::string(s) + "'");
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // one per ranked, non-ignored detection
  double ap = 0.0;
  ApMode mode = ApMode::elevenPoint;
  std::size_t n_positives = 0;
};

// AP from a PR sequence.
//   elevenPoint: mean over t in {0, 0.1, .., 1} of max precision at recall >= t
//   continuous:  area under the monotone precision envelope
inline double ap_from_points(const std::vector<PrPoint>& pts, ApMode mode) {
  if (mode == ApMode::elevenPoint) {
    double sum = 0.0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double best = 0.0;
      for (const auto& p : pts) {
        if (p.recall >= t) best = std::max(best, p.precision);
      }
      sum += best;
    }
    return sum / 11.0;
  }
  std::vector<double> env(pts.size());
  double run = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    run = std::max(run, pts[i].precision);
    env[i] = run;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * env[i];
    prev_recall = pts[i].recall;
  }
  return ap;
}

// VOC-style average precision for one class.
//
// Detections of the class are ranked by descending score (stable in input
// order). Each one is matched to the unmatched ground-truth box of its image
// with the highest IoU (difficult boxes stay matchable and are never
// consumed); it is a true positive iff that IoU > 0.5 and the box is not
// difficult, ignored iff the box is difficult, otherwise a false positive.
// Difficult boxes do not count as positives. Returns nullopt when the class
// has no non-difficult ground truth.
inline std::optional<PrCurve> average_precision(const std::vector<Detection>& dets,
                                                const Dataset& gt, const std::string& cls,
                                                ApMode mode = ApMode::elevenPoint) {
  const std::string key = class_key(cls);
  struct GtBox {
    BoundingBox box;
    bool difficult;
    bool matched;
  };
  std::map<std::string, std::vector<GtBox>> by_image;
  std::size_t npos = 0;
  for (const auto& s : gt.samples()) {
    if (class_key(s.class_label) != key) continue;
    by_image[s.image_id].push_back({s.box, s.difficult, false});
    if (!s.difficult) ++npos;
  }
  if (npos == 0) return std::nullopt;

  std::vector<const Detection*> ranked;
  for (const auto& d : dets) {
    if (class_key(d.class_label) == key) ranked.push_back(&d);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Detection* x, const Detection* y) { return x->score > y->score; });

  PrCurve curve;
  curve.mode = mode;
  curve.n_positives = npos;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const Detection* d : ranked) {
    GtBox* best = nullptr;
    double best_iou = -1.0;
    auto it = by_image.find(d->image_id);
    if (it != by_image.end()) {
      for (auto& g : it->second) {
        if (g.matched) continue;
        const double o = iou(d->box, g.box);
        if (o > best_iou) {
          best_iou = o;
          best = &g;
        }
      }
    }
    if (best != nullptr && best_iou > kIouThreshold) {
      if (best->difficult) continue;
      best->matched = true;
      ++tp;
    } else {
      ++fp;
    }
    curve.points.push_back({double(tp) / double(npos), double(tp) / double(tp + fp)});
  }
  curve.ap = ap_from_points(curve.points, mode);
  return curve;
}

struct MeanAp {
  std::optional<double> value;
  std::vector<std::string> skipped;  // classes with undefined AP
};

inline MeanAp mean_ap(const std::map<std::string, std::optional<double>>& per_class) {
  MeanAp out;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [cls, ap] : per_class) {
    if (ap) {
      sum += *ap;
      ++n;
    } else {
      out.skipped.push_back(cls);
    }
  }
  if (n > 0) out.value = sum / double(n);
  return out;
}

// Detection CSV: image_id,class,x_min,y_min,x_max,y_max,score
inline std::vector<Detection> read_detections(std::istream& in, std::string_view source) {
  const CsvTable t = read_csv(in, source);
  const std::size_t ci = t.column("image_id"), cc = t.column("class"), cx0 = t.column("x_min"),
                    cy0 = t.column("y_min"), cx1 = t.column("x_max"), cy1 = t.column("y_max"),
                    cs = t.column("score");
  std::vector<Detection> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(source) + ":" + std::to_string(t.line_numbers[r]);
    Detection d;
    d.image_id = row[ci];
    d.class_label = row[cc];
    d.box = {parse_double(row[cx0], where), parse_double(row[cy0], where),
             parse_double(row[cx1], where), parse_double(row[cy1], where)};
    d.score = parse_double(row[cs], where);
    if (!d.box.is_valid() || !std::isfinite(d.score)) {
      throw DataError(where + ": invalid detection box or score");
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<Detection> read_detections_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_detections(in, path);
}

}  // namespace dshift
