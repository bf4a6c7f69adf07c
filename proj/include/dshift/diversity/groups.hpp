#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/common/random.hpp"
#include "dshift/corpus/manifest.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

enum class GroupOrigin { manual, automatic };

inline std::string_view group_origin_name(GroupOrigin o) {
  return o == GroupOrigin::manual ? "manual" : "automatic";
}

// Partition of one class's samples into near-identical groups.
struct GroupSet {
  std::string class_label;
  std::vector<std::vector<std::string>> groups;
  GroupOrigin origin = GroupOrigin::manual;

  std::size_t n_groups() const noexcept { return groups.size(); }
  std::size_t n_samples() const noexcept {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
  }
};

struct FeatureRow {
  std::string sample_id;
  std::vector<float> values;
};

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace detail

// Single-linkage grouping: samples whose features lie within `threshold`
// (Euclidean) are linked, and groups are the connected components. Groups
// are listed by their first member in input order.
inline GroupSet group_near_identical(const std::string& class_label,
                                     const std::vector<FeatureRow>& rows, double threshold) {
  if (!(threshold > 0.0)) throw UsageError("grouping threshold must be > 0");
  std::vector<std::string> missing;
  for (const auto& r : rows) {
    if (r.values.empty()) missing.push_back(r.sample_id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError("missing features for: " + list);
  }
  const std::size_t n = rows.size();
  const std::size_t dim = n ? rows[0].values.size() : 0;
  for (const auto& r : rows) {
    if (r.values.size() != dim) throw DataError("feature dimensions differ within class " + class_label);
  }
  const double t2 = threshold * threshold;
  detail::DisjointSets ds(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = double(rows[i].values[k]) - double(rows[j].values[k]);
        d2 += d * d;
      }
      if (d2 <= t2) ds.unite(i, j);
    }
  }
  GroupSet gs{class_label, {}, GroupOrigin::automatic};
  std::map<std::size_t, std::size_t> slot;  // root -> group index
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = ds.find(i);
    auto [it, inserted] = slot.emplace(root, gs.groups.size());
    if (inserted) gs.groups.emplace_back();
    gs.groups[it->second].push_back(rows[i].sample_id);
  }
  return gs;
}

// Groups from the group_id labels carried by the samples of one class.
inline GroupSet ingest_groups(const std::string& class_label, const std::vector<const Sample*>& samples) {
  GroupSet gs{class_label, {}, GroupOrigin::manual};
  std::map<std::string, std::size_t> slot;
  for (const Sample* s : samples) {
    if (!s->group_id) {
      throw DataError("sample '" + s->sample_id + "' of class '" + class_label + "' has no group_id");
    }
    auto [it, inserted] = slot.emplace(*s->group_id, gs.groups.size());
    if (inserted) gs.groups.emplace_back();
    gs.groups[it->second].push_back(s->sample_id);
  }
  return gs;
}

inline double diversity_ratio(const GroupSet& g) {
  const std::size_t n = g.n_samples();
  if (n == 0) throw DataError("diversity ratio of an empty group set");
  return double(g.n_groups()) / double(n);
}

struct UniqueSelection {
  std::vector<std::string> a;  // selected sample ids, group order
  std::vector<std::string> b;
};

// One uniformly random representative per group on each side, then the side
// with more groups is subsampled uniformly to the smaller group count. All
// draws come from one stream seeded by `seed` (A representatives, then B
// representatives, then the subsample).
inline UniqueSelection unique_resample(const GroupSet& ga, const GroupSet& gb, std::uint64_t seed) {
  if (ga.groups.empty() || gb.groups.empty()) {
    throw DataError("unique_resample: empty group set for class '" +
                    (ga.groups.empty() ? ga.class_label : gb.class_label) + "'");
  }
  Rng rng(seed);
  auto representatives = [&](const GroupSet& g) {
    std::vector<std::string> reps;
    reps.reserve(g.groups.size());
    for (const auto& grp : g.groups) {
      if (grp.empty()) throw DataError("group set of class '" + g.class_label + "' has an empty group");
      reps.push_back(grp[static_cast<std::size_t>(rng.below(grp.size()))]);
    }
    return reps;
  };
  UniqueSelection sel{representatives(ga), representatives(gb)};
  const std::size_t n = std::min(sel.a.size(), sel.b.size());
  auto shrink = [&](std::vector<std::string>& v) {
    if (v.size() == n) return;
    std::vector<std::string> kept;
    kept.reserve(n);
    for (std::size_t i : choose_subset(v.size(), n, rng)) kept.push_back(v[i]);
    v = std::move(kept);
  };
  shrink(sel.a);
  shrink(sel.b);
  return sel;
}

}  // namespace dshift
