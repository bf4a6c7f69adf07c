#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dshift/common/random.hpp"
#include "dshift/corpus/manifest.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

struct ClassCounts {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t kept = 0;
};

struct CountEqualization {
  SplitManifest a;
  SplitManifest b;
  std::map<std::string, ClassCounts> per_class;  // by class key
  Warnings warnings;
};

namespace detail {

// Reports classes whose spelling differs between or within the two datasets.
inline void report_spelling_mismatches(const Dataset& a, const Dataset& b, Warnings& w) {
  const auto sa = a.class_spellings();
  const auto sb = b.class_spellings();
  for (const auto& [key, spell_a] : sa) {
    auto it = sb.find(key);
    std::set<std::string> all = spell_a;
    if (it != sb.end()) all.insert(it->second.begin(), it->second.end());
    if (all.size() > 1) {
      std::string list;
      for (const auto& s : all) list += (list.empty() ? "'" : ", '") + s + "'";
      w.push_back("class '" + key + "' matched across differing spellings: " + list);
    }
  }
}

inline std::vector<std::string> ids_in_dataset_order(const Dataset& d,
                                                     const std::set<std::size_t>& keep) {
  std::vector<std::string> ids;
  ids.reserve(keep.size());
  for (std::size_t i : keep) ids.push_back(d.samples()[i].sample_id);
  return ids;
}

}  // namespace detail

// Per shared class, keeps min(|A_c|, |B_c|) non-difficult samples on both
// sides. The smaller side is kept whole; the larger side is a uniform random
// subset drawn from derive_seed(seed, "counts", class). Classes present on
// only one side are dropped with a warning.
inline CountEqualization equalize_counts(const Dataset& a, const Dataset& b, std::uint64_t seed) {
  CountEqualization out;
  out.a = {a.name(), Stage::counts, seed, {}, nlohmann::json::object()};
  out.b = {b.name(), Stage::counts, seed, {}, nlohmann::json::object()};
  detail::report_spelling_mismatches(a, b, out.warnings);

  const auto ca = a.by_class(false);
  const auto cb = b.by_class(false);
  for (const auto& [key, _] : ca) {
    if (cb.find(key) == cb.end()) {
      out.warnings.push_back("class '" + key + "' only in " + a.name() + "; excluded");
    }
  }
  for (const auto& [key, _] : cb) {
    if (ca.find(key) == ca.end()) {
      out.warnings.push_back("class '" + key + "' only in " + b.name() + "; excluded");
    }
  }

  std::set<std::size_t> keep_a;
  std::set<std::size_t> keep_b;
  for (const auto& [key, ia] : ca) {
    auto it = cb.find(key);
    if (it == cb.end()) continue;
    const auto& ib = it->second;
    const std::size_t n = std::min(ia.size(), ib.size());
    out.per_class[key] = {ia.size(), ib.size(), n};

    Rng rng(derive_seed(seed, "counts", key));
    auto take = [&](const std::vector<std::size_t>& idx, std::set<std::size_t>& keep) {
      if (idx.size() == n) {
        keep.insert(idx.begin(), idx.end());
        return;
      }
      for (std::size_t p : choose_subset(idx.size(), n, rng)) keep.insert(idx[p]);
    };
    take(ia, keep_a);
    take(ib, keep_b);
  }
  if (out.per_class.empty()) {
    throw DataError("datasets '" + a.name() + "' and '" + b.name() + "' share no class label");
  }
  out.a.sample_ids = detail::ids_in_dataset_order(a, keep_a);
  out.b.sample_ids = detail::ids_in_dataset_order(b, keep_b);
  return out;
}

// ---------------------------------------------------------------- framing

struct FramingStats {
  std::optional<double> mean_relative_size;
  std::optional<double> mean_aspect_ratio;
  std::optional<double> frac_truncated;
  std::optional<double> frac_difficult;
  std::size_t n_samples = 0;
  std::size_t n_used = 0;  // non-difficult samples behind the means
};

// Size, aspect-ratio and truncation are averaged over non-difficult samples;
// frac_difficult is over all samples. Empty inputs give undefined fields.
inline FramingStats framing_stats(const Dataset& d) {
  FramingStats st;
  st.n_samples = d.size();
  if (d.empty()) return st;
  double size_sum = 0.0;
  double ratio_sum = 0.0;
  std::size_t truncated = 0;
  std::size_t difficult = 0;
  for (const auto& s : d.samples()) {
    if (s.difficult) {
      ++difficult;
      continue;
    }
    const ImageSize& dims = d.dims_of(s);
    size_sum += s.box.area() / (double(dims.width) * double(dims.height));
    ratio_sum += s.box.width() / s.box.height();
    if (s.truncated) ++truncated;
    ++st.n_used;
  }
  st.frac_difficult = double(difficult) / double(d.size());
  if (st.n_used > 0) {
    const double n = double(st.n_used);
    st.mean_relative_size = size_sum / n;
    st.mean_aspect_ratio = ratio_sum / n;
    st.frac_truncated = double(truncated) / n;
  }
  return st;
}

}  // namespace dshift
