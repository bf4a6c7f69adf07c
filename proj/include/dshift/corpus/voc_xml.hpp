#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "dshift/common/error.hpp"
#include "dshift/common/text.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

struct RejectedObject {
  std::size_t object_index = 0;
  std::string reason;
};

struct VocAnnotation {
  std::string image_id;
  ImageSize size;
  std::vector<Sample> samples;
  std::vector<RejectedObject> rejected;
  Warnings warnings;
};

namespace detail {

inline double voc_coord(const boost::property_tree::ptree& bndbox, const char* key,
                        std::size_t object_index) {
  auto v = bndbox.get_optional<std::string>(key);
  if (!v) {
    throw DataError("object " + std::to_string(object_index) + ": bndbox is missing <" +
                    key + ">");
  }
  return parse_double(*v, std::string("object ") + std::to_string(object_index) + " " + key);
}

inline bool voc_flag(const boost::property_tree::ptree& obj, const char* key) {
  auto v = obj.get_optional<std::string>(key);
  return v && trim(*v) == "1";
}

}  // namespace detail

// Reads one VOC-style annotation document (size, object/name, bndbox,
// truncated, difficult). The image id is the <filename> without extension,
// falling back to `fallback_image_id`. Sample ids are "<image_id>#<k>" with k
// the 0-based object index. Boxes are clamped to the image; zero-area boxes
// after clamping are rejected and listed in `rejected`.
inline VocAnnotation parse_voc_xml(std::istream& document, const std::string& fallback_image_id = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(document, tree);
  } catch (const pt::xml_parser_error& e) {
    throw DataError("malformed XML at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto* root = tree.get_child_optional("annotation").get_ptr();
  if (root == nullptr) throw DataError("XML has no <annotation> root element");

  VocAnnotation out;
  auto filename = root->get_optional<std::string>("filename");
  out.image_id = filename ? std::filesystem::path(trim(*filename)).stem().string() : fallback_image_id;
  if (out.image_id.empty()) throw DataError("annotation has no <filename> and no fallback id");

  auto w = root->get_optional<std::string>("size.width");
  auto h = root->get_optional<std::string>("size.height");
  if (!w || !h) throw DataError(out.image_id + ": missing <size><width>/<height>");
  out.size.width = static_cast<int>(parse_double(*w, "size.width"));
  out.size.height = static_cast<int>(parse_double(*h, "size.height"));
  if (out.size.width <= 0 || out.size.height <= 0) {
    throw DataError(out.image_id + ": non-positive image size");
  }

  std::size_t index = 0;
  for (const auto& [tag, obj] : *root) {
    if (tag != "object") continue;
    const std::size_t k = index++;
    auto name = obj.get_optional<std::string>("name");
    if (!name) throw DataError(out.image_id + ": object " + std::to_string(k) + " has no <name>");
    const auto* bnd = obj.get_child_optional("bndbox").get_ptr();
    if (bnd == nullptr) {
      throw DataError(out.image_id + ": object " + std::to_string(k) + " has no <bndbox>");
    }
    BoundingBox raw;
    try {
      raw = {detail::voc_coord(*bnd, "xmin", k), detail::voc_coord(*bnd, "ymin", k),
             detail::voc_coord(*bnd, "xmax", k), detail::voc_coord(*bnd, "ymax", k)};
    } catch (const DataError& e) {
      throw DataError(out.image_id + ": " + e.what());
    }
    BoundingBox box{std::clamp(raw.x_min, 0.0, double(out.size.width)),
                    std::clamp(raw.y_min, 0.0, double(out.size.height)),
                    std::clamp(raw.x_max, 0.0, double(out.size.width)),
                    std::clamp(raw.y_max, 0.0, double(out.size.height))};
    if (!(box == raw)) {
      out.warnings.push_back(out.image_id + ": object " + std::to_string(k) +
                             " box clamped to image bounds");
    }
    if (!box.is_valid()) {
      out.rejected.push_back({k, "zero-area box after clamping"});
      continue;
    }
    Sample s;
    s.sample_id = out.image_id + "#" + std::to_string(k);
    s.image_id = out.image_id;
    s.class_label = trim(*name);
    s.box = box;
    s.truncated = detail::voc_flag(obj, "truncated");
    s.difficult = detail::voc_flag(obj, "difficult");
    out.samples.push_back(std::move(s));
  }
  return out;
}

inline VocAnnotation parse_voc_xml_string(const std::string& xml, const std::string& fallback = {}) {
  std::istringstream in(xml);
  return parse_voc_xml(in, fallback);
}

inline VocAnnotation parse_voc_xml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_voc_xml(in, path.stem().string());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace dshift
