#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dshift/aspects/kde.hpp"
#include "dshift/common/error.hpp"

namespace dshift {

enum class KlVariant {
  // sum_i (fA(a_i) - fB(b_i)) * ln(fA(a_i) / fB(b_i)): each density is
  // evaluated at its own set's i-th point, and the i-th points are paired.
  paired,
  // mean_i ln(fA(a_i)/fB(a_i)) + mean_i ln(fB(b_i)/fA(b_i)): the usual
  // plug-in estimate of KL(A||B) + KL(B||A). Can be slightly negative.
  plugin,
};

inline std::string_view kl_variant_name(KlVariant v) {
  return v == KlVariant::paired ? "paired" : "plugin";
}

inline KlVariant parse_kl_variant(std::string_view s) {
  if (s == "paired") return KlVariant::paired;
  if (s == "plugin") return KlVariant::plugin;
  throw UsageError("unknown KL variant '" + std::string(s) + "' (expected paired or plugin)");
}

// Symmetrized KL divergence between two equally sized point sets with fixed
// bandwidths. Swapping the arguments gives a bit-identical result.
inline double sym_kl(std::span<const Point2> a, double ha, std::span<const Point2> b, double hb,
                     KlVariant variant = KlVariant::paired) {
  if (a.size() != b.size()) {
    throw DataError("sym_kl needs equally sized sets (got " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DataError("sym_kl needs non-empty sets");
  if (variant == KlVariant::paired) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double la = kde_log_density(a, ha, a[i]);
      const double lb = kde_log_density(b, hb, b[i]);
      total += (std::exp(la) - std::exp(lb)) * (la - lb);
    }
    return total;
  }
  double ab = 0.0;
  double ba = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += kde_log_density(a, ha, a[i]) - kde_log_density(b, hb, a[i]);
    ba += kde_log_density(b, hb, b[i]) - kde_log_density(a, ha, b[i]);
  }
  const double n = double(a.size());
  return ab / n + ba / n;
}

// Each set uses its own fitted bandwidth.
inline double sym_kl(const EmbeddedSet& a, const EmbeddedSet& b, KlVariant variant = KlVariant::paired) {
  const auto pa = a.coords();
  const auto pb = b.coords();
  if (pa.size() != pb.size()) {
    throw DataError("sym_kl needs equally sized sets (got " + std::to_string(pa.size()) + " and " +
                    std::to_string(pb.size()) + ")");
  }
  return sym_kl(pa, kde_bandwidth(pa), pb, kde_bandwidth(pb), variant);
}

}  // namespace dshift
