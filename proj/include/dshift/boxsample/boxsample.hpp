#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/common/random.hpp"
#include "dshift/common/text.hpp"
#include "dshift/corpus/types.hpp"
#include "dshift/metrics/metrics.hpp"

namespace dshift {

struct CandidateBox {
  std::string image_id;
  int frame_index = 0;
  BoundingBox box;
  double objectness = 0.0;
  double border_contact = 0.0;
};

// Share of the box perimeter on sides that lie within one pixel of the image
// boundary. Each side counts whole or not at all.
inline double border_contact(const BoundingBox& b, const ImageSize& img) {
  const double w = b.width();
  const double h = b.height();
  double touching = 0.0;
  if (b.x_min <= 1.0) touching += h;
  if (b.x_max >= img.width - 1.0) touching += h;
  if (b.y_min <= 1.0) touching += w;
  if (b.y_max >= img.height - 1.0) touching += w;
  return touching / (2.0 * (w + h));
}

// objectness * (1 - border_contact)
inline double box_quality(double objectness, double contact) {
  if (!(objectness >= 0.0 && objectness <= 1.0) || !(contact >= 0.0 && contact <= 1.0)) {
    throw DataError("box_quality inputs must lie in [0, 1]");
  }
  return objectness * (1.0 - contact);
}

// Draws n distinct candidates without replacement. Each draw picks index i
// with probability weight_i / (sum of remaining weights); u = uniform() times
// the remaining total is located by a running sum over remaining candidates
// in input order.
inline std::vector<std::size_t> multinomial_sample_indices(const std::vector<double>& weights,
                                                           std::size_t n, std::uint64_t seed) {
  std::size_t positive = 0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("sampling weights must be finite and >= 0");
    if (w > 0.0) ++positive;
  }
  if (n > positive) {
    throw DataError("requested " + std::to_string(n) + " boxes but only " + std::to_string(positive) +
                    " candidates have positive quality (short by " + std::to_string(n - positive) + ")");
  }
  std::vector<double> w = weights;
  std::vector<std::size_t> out;
  out.reserve(n);
  Rng rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    const double u = rng.uniform() * total;
    double run = 0.0;
    std::size_t pick = w.size();
    std::size_t last_positive = w.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last_positive = i;
      run += w[i];
      if (u < run) {
        pick = i;
        break;
      }
    }
    if (pick == w.size()) pick = last_positive;  // rounding at the top end
    out.push_back(pick);
    w[pick] = 0.0;
  }
  return out;
}

inline std::vector<CandidateBox> multinomial_sample(const std::vector<CandidateBox>& candidates,
                                                    std::size_t n, std::uint64_t seed) {
  std::vector<double> q;
  q.reserve(candidates.size());
  for (const auto& c : candidates) q.push_back(box_quality(c.objectness, c.border_contact));
  std::vector<CandidateBox> out;
  for (std::size_t i : multinomial_sample_indices(q, n, seed)) out.push_back(candidates[i]);
  return out;
}

// Pairs each sampled box with the ground-truth box of the same image (the
// best-overlapping one when an image has several) and measures CorLoc.
// Candidates on images without ground truth are skipped and counted.
struct SampledCorLoc {
  std::optional<double> corloc;
  std::size_t paired = 0;
  std::size_t unmatched = 0;
};

inline SampledCorLoc corloc_of_sampled(const std::vector<CandidateBox>& sampled, const Dataset& gt) {
  std::map<std::string, std::vector<BoundingBox>> by_image;
  for (const auto& s : gt.samples()) by_image[s.image_id].push_back(s.box);
  std::vector<std::pair<BoundingBox, BoundingBox>> pairs;
  SampledCorLoc out;
  for (const auto& c : sampled) {
    auto it = by_image.find(c.image_id);
    if (it == by_image.end()) {
      ++out.unmatched;
      continue;
    }
    const BoundingBox* best = &it->second.front();
    double best_iou = -1.0;
    for (const auto& g : it->second) {
      const double o = iou(c.box, g);
      if (o > best_iou) {
        best_iou = o;
        best = &g;
      }
    }
    pairs.emplace_back(c.box, *best);
  }
  out.paired = pairs.size();
  out.corloc = corloc(pairs);
  return out;
}

// Candidate CSV: image_id,x_min,y_min,x_max,y_max,objectness[,frame_index]
// Border contact is computed from the image sizes in `dims`.
inline std::vector<CandidateBox> read_candidates(const std::string& path,
                                                 const std::map<std::string, ImageSize>& dims) {
  const CsvTable t = read_csv_file(path);
  const std::size_t ci = t.column("image_id"), cx0 = t.column("x_min"), cy0 = t.column("y_min"),
                    cx1 = t.column("x_max"), cy1 = t.column("y_max"), co = t.column("objectness");
  std::optional<std::size_t> cf;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "frame_index") cf = i;
  }
  std::vector<CandidateBox> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    CandidateBox c;
    c.image_id = row[ci];
    c.box = {parse_double(row[cx0], where), parse_double(row[cy0], where), parse_double(row[cx1], where),
             parse_double(row[cy1], where)};
    c.objectness = parse_double(row[co], where);
    if (cf) c.frame_index = static_cast<int>(parse_double(row[*cf], where));
    if (!c.box.is_valid()) throw DataError(where + ": invalid candidate box");
    if (!(c.objectness >= 0.0 && c.objectness <= 1.0)) throw DataError(where + ": objectness outside [0, 1]");
    auto it = dims.find(c.image_id);
    if (it == dims.end()) throw DataError(where + ": unknown image '" + c.image_id + "'");
    if (!box_within(c.box, it->second)) throw DataError(where + ": candidate box exceeds its image");
    c.border_contact = border_contact(c.box, it->second);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace dshift
