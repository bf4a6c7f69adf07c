#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dshift/corpus/types.hpp"
#include "dshift/diversity/groups.hpp"

namespace fixtures {

// Per-class training sample counts of the still-image (VOC) and video (YTO)
// training sets and the count-equalized sizes.
struct CountRow {
  const char* cls;
  std::size_t voc;
  std::size_t yto;
  std::size_t equalized;
};

inline constexpr std::array<CountRow, 10> kCounts{{
    {"aeroplane", 306, 415, 306},
    {"bird", 486, 359, 359},
    {"boat", 290, 357, 290},
    {"car", 1250, 915, 915},
    {"cat", 376, 326, 326},
    {"cow", 259, 321, 259},
    {"dog", 510, 454, 454},
    {"horse", 362, 427, 362},
    {"motorbike", 339, 360, 339},
    {"train", 297, 372, 297},
}};
inline constexpr std::size_t kCountsTotal = 3907;

// Near-identical group counts per class and the unique-equalized sizes.
struct GroupRow {
  const char* cls;
  std::size_t yto_groups;
  std::size_t voc_groups;
  double yto_ratio;
  double voc_ratio;
  std::size_t equalized;
};

inline constexpr std::array<GroupRow, 10> kGroups{{
    {"aeroplane", 244, 268, 0.59, 0.88, 244},
    {"bird", 123, 452, 0.34, 0.93, 123},
    {"boat", 138, 275, 0.39, 0.95, 138},
    {"car", 310, 1221, 0.34, 0.98, 310},
    {"cat", 249, 376, 0.76, 1.00, 249},
    {"cow", 90, 252, 0.28, 0.97, 90},
    {"dog", 295, 507, 0.65, 0.99, 295},
    {"horse", 286, 358, 0.67, 0.99, 286},
    {"motorbike", 243, 337, 0.68, 0.99, 243},
    {"train", 223, 294, 0.60, 0.99, 223},
}};
inline constexpr std::size_t kGroupsTotal = 2201;

// A dataset with `count(row)` samples per class, ids "<prefix>-<class>-<i>".
template <typename CountOf>
dshift::Dataset count_dataset(const std::string& name, const std::string& prefix, CountOf count) {
  std::vector<dshift::Sample> samples;
  std::map<std::string, dshift::ImageSize> dims;
  for (const auto& row : kCounts) {
    for (std::size_t i = 0; i < count(row); ++i) {
      dshift::Sample s;
      s.sample_id = prefix + "-" + row.cls + "-" + std::to_string(i);
      s.image_id = s.sample_id;
      s.class_label = row.cls;
      s.box = {10, 10, 60, 40};
      dims[s.image_id] = {100, 80};
      samples.push_back(std::move(s));
    }
  }
  return {name, std::move(samples), std::move(dims)};
}

inline dshift::Dataset voc_counts() {
  return count_dataset("voc", "v", [](const CountRow& r) { return r.voc; });
}
inline dshift::Dataset yto_counts() {
  return count_dataset("yto", "y", [](const CountRow& r) { return r.yto; });
}

// n samples split into g groups whose sizes differ by at most one.
inline dshift::GroupSet group_set(const std::string& cls, const std::string& prefix, std::size_t n,
                                  std::size_t g) {
  dshift::GroupSet gs{cls, std::vector<std::vector<std::string>>(g), dshift::GroupOrigin::manual};
  for (std::size_t i = 0; i < n; ++i) gs.groups[i % g].push_back(prefix + "-" + cls + "-" + std::to_string(i));
  return gs;
}

}  // namespace fixtures
