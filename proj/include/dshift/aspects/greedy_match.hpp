#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "dshift/aspects/divergence.hpp"
#include "dshift/aspects/embedding.hpp"
#include "dshift/aspects/kde.hpp"
#include "dshift/common/error.hpp"

namespace dshift {

inline constexpr double kDefaultEpsilon = 0.1;

struct MatchedPair {
  std::string id_a;
  std::string id_b;
  double distance = 0.0;
};

struct CurvePoint {
  std::size_t pair_count = 0;
  double d_kl = 0.0;
};

struct AspectMatch {
  std::vector<MatchedPair> pairs;   // acceptance order, distances non-decreasing
  double epsilon = kDefaultEpsilon;
  std::vector<CurvePoint> curve;    // d_KL after every accepted pair
  std::optional<double> breach;     // d_KL of the first rejected state, if any
  double bandwidth_a = 0.0;
  double bandwidth_b = 0.0;
  bool single_pair_fallback = false;
  Warnings warnings;

  double final_d_kl() const { return curve.empty() ? 0.0 : curve.back().d_kl; }
};

struct CandidatePair {
  double distance;
  std::size_t ia;
  std::size_t ib;
};

// All cross-domain pairs by ascending Euclidean distance, ties broken by
// (id_a, id_b).
inline std::vector<CandidatePair> sorted_cross_pairs(const EmbeddedSet& a, const EmbeddedSet& b) {
  std::vector<CandidatePair> pairs;
  pairs.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double dx = a.points[i].xy[0] - b.points[j].xy[0];
      const double dy = a.points[i].xy[1] - b.points[j].xy[1];
      pairs.push_back({std::sqrt(dx * dx + dy * dy), i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [&](const CandidatePair& x, const CandidatePair& y) {
    return std::tie(x.distance, a.points[x.ia].sample_id, b.points[x.ib].sample_id) <
           std::tie(y.distance, a.points[y.ia].sample_id, b.points[y.ib].sample_id);
  });
  return pairs;
}

// Greedy forward selection of cross-domain pairs, closest first, each sample
// used at most once. d_KL of the selected subsets is recomputed after every
// acceptance using bandwidths fitted once on the full sets; growth stops at
// the first pair that brings d_KL to epsilon or above, and that pair is
// discarded. If the very first pair already breaches, it is kept alone and a
// warning is raised.
inline AspectMatch greedy_aspect_match(const EmbeddedSet& a, const EmbeddedSet& b,
                                       double epsilon = kDefaultEpsilon,
                                       KlVariant variant = KlVariant::paired) {
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be > 0");
  if (a.size() == 0 || b.size() == 0) throw DataError("greedy_aspect_match needs non-empty sets");
  a.validate();
  b.validate();

  AspectMatch m;
  m.epsilon = epsilon;
  const auto all_a = a.coords();
  const auto all_b = b.coords();
  m.bandwidth_a = kde_bandwidth(all_a);
  m.bandwidth_b = kde_bandwidth(all_b);

  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  std::vector<Point2> sel_a;
  std::vector<Point2> sel_b;
  const std::size_t limit = std::min(a.size(), b.size());

  for (const CandidatePair& p : sorted_cross_pairs(a, b)) {
    if (m.pairs.size() == limit) break;
    if (used_a[p.ia] || used_b[p.ib]) continue;
    sel_a.push_back(all_a[p.ia]);
    sel_b.push_back(all_b[p.ib]);
    const double d = sym_kl(sel_a, m.bandwidth_a, sel_b, m.bandwidth_b, variant);
    if (!(d < epsilon)) {
      if (m.pairs.empty()) {
        m.pairs.push_back({a.points[p.ia].sample_id, b.points[p.ib].sample_id, p.distance});
        m.curve.push_back({1, d});
        m.single_pair_fallback = true;
        m.warnings.push_back(a.class_label + ": the closest pair alone has d_KL " + format_number(d) +
                             " >= epsilon " + format_number(epsilon) + "; keeping that single pair");
      } else {
        m.breach = d;
      }
      break;
    }
    used_a[p.ia] = true;
    used_b[p.ib] = true;
    m.pairs.push_back({a.points[p.ia].sample_id, b.points[p.ib].sample_id, p.distance});
    m.curve.push_back({m.pairs.size(), d});
  }
  return m;
}

// Curve CSV: pair_count,d_kl
inline void write_curve_csv(std::ostream& out, const AspectMatch& m) {
  out << "pair_count,d_kl\n";
  for (const auto& c : m.curve) out << c.pair_count << ',' << format_number(c.d_kl) << '\n';
}

}  // namespace dshift
