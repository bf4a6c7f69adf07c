#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/common/text.hpp"

namespace dshift {

// Axis-aligned box in continuous pixel coordinates, origin top-left.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }

  bool is_valid() const noexcept {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min >= 0.0 && y_min >= 0.0 && x_min < x_max &&
           y_min < y_max;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

inline bool box_within(const BoundingBox& b, const ImageSize& s) noexcept {
  return b.x_max <= s.width && b.y_max <= s.height;
}

// One annotated object instance.
struct Sample {
  std::string sample_id;
  std::string image_id;
  std::string class_label;
  BoundingBox box;
  bool truncated = false;
  bool difficult = false;
  std::optional<std::string> group_id;
  std::optional<std::string> feature_ref;
  std::optional<std::vector<float>> feature;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Immutable collection of samples plus the dimensions of every referenced
// image. Construction validates ids, boxes and dimensions.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::string name, std::vector<Sample> samples,
          std::map<std::string, ImageSize> image_dims)
      : name_(std::move(name)), samples_(std::move(samples)), dims_(std::move(image_dims)) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      if (s.sample_id.empty()) throw DataError(name_ + ": sample with empty sample_id");
      if (!index_.emplace(s.sample_id, i).second) {
        throw DataError(name_ + ": duplicate sample_id '" + s.sample_id + "'");
      }
      if (!s.box.is_valid()) {
        throw DataError(name_ + ": sample '" + s.sample_id + "' has an invalid box");
      }
      auto it = dims_.find(s.image_id);
      if (it == dims_.end()) {
        throw DataError(name_ + ": no image size recorded for image '" + s.image_id + "'");
      }
      if (!box_within(s.box, it->second)) {
        throw DataError(name_ + ": box of sample '" + s.sample_id + "' exceeds its image");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const std::map<std::string, ImageSize>& image_dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  const Sample* find(const std::string& sample_id) const {
    auto it = index_.find(sample_id);
    return it == index_.end() ? nullptr : &samples_[it->second];
  }

  const Sample& at(const std::string& sample_id) const {
    const Sample* s = find(sample_id);
    if (s == nullptr) throw DataError(name_ + ": unknown sample_id '" + sample_id + "'");
    return *s;
  }

  const ImageSize& dims_of(const Sample& s) const { return dims_.at(s.image_id); }

  // Sample indices per normalized class key, in dataset order.
  std::map<std::string, std::vector<std::size_t>> by_class(bool include_difficult = true) const {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!include_difficult && samples_[i].difficult) continue;
      out[class_key(samples_[i].class_label)].push_back(i);
    }
    return out;
  }

  // Distinct raw spellings of each class key.
  std::map<std::string, std::set<std::string>> class_spellings() const {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& s : samples_) out[class_key(s.class_label)].insert(s.class_label);
    return out;
  }

  // Samples whose id is in `ids`, kept in dataset order. Unknown ids throw.
  Dataset subset(const std::vector<std::string>& ids) const {
    std::set<std::string> wanted;
    for (const auto& id : ids) {
      at(id);
      wanted.insert(id);
    }
    std::vector<Sample> picked;
    std::map<std::string, ImageSize> dims;
    for (const auto& s : samples_) {
      if (wanted.count(s.sample_id) != 0u) {
        picked.push_back(s);
        dims.emplace(s.image_id, dims_.at(s.image_id));
      }
    }
    return Dataset(name_, std::move(picked), std::move(dims));
  }

  Dataset with_samples(std::vector<Sample> samples) const {
    return Dataset(name_, std::move(samples), dims_);
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.name_ == b.name_ && a.samples_ == b.samples_ && a.dims_ == b.dims_;
  }

 private:
  std::string name_;
  std::vector<Sample> samples_;
  std::map<std::string, ImageSize> dims_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dshift
