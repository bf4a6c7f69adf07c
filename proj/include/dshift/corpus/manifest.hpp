#pragma once

// JSON Lines encodings.
//
// Dataset manifest: one sample per line, fields in this order:
//   {"sample_id":..,"image_id":..,"class":..,"box":[x_min,y_min,x_max,y_max],
//    "truncated":bool,"difficult":bool,"group_id":str|null,"feature_ref":str|null,
//    "image_size":[width,height]}
//
// Split manifest: a header line followed by one {"sample_id":..} line per
// selected sample, in selection order:
//   {"source_dataset":..,"stage":..,"seed":u64,"rng":"mt19937_64/v1",
//    "transform_params":{..},"count":N}
//
// Both writers emit canonical text (fixed field order, sorted keys inside
// transform_params, shortest round-trip doubles), so write(parse(x)) == x for
// canonical x.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dshift/common/error.hpp"
#include "dshift/common/random.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

enum class Stage { input, counts, unique, blurred, aspects };

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::input: return "input";
    case Stage::counts: return "counts";
    case Stage::unique: return "unique";
    case Stage::blurred: return "blurred";
    case Stage::aspects: return "aspects";
  }
  return "input";
}

inline Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::input, Stage::counts, Stage::unique, Stage::blurred, Stage::aspects}) {
    if (stage_name(s) == name) return s;
  }
  throw DataError("unknown stage tag '" + std::string(name) + "'");
}

struct SplitManifest {
  std::string source_dataset;
  Stage stage = Stage::input;
  std::uint64_t seed = 0;
  std::vector<std::string> sample_ids;
  nlohmann::json transform_params = nlohmann::json::object();

  std::size_t size() const noexcept { return sample_ids.size(); }
  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

namespace detail {

template <typename F>
void for_each_json_line(std::istream& in, std::string_view source, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      f(j, lineno);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string(source) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace detail

// ---------------------------------------------------------------- dataset

inline std::string sample_to_json_line(const Sample& s, const ImageSize& dims) {
  nlohmann::ordered_json j;
  j["sample_id"] = s.sample_id;
  j["image_id"] = s.image_id;
  j["class"] = s.class_label;
  j["box"] = {s.box.x_min, s.box.y_min, s.box.x_max, s.box.y_max};
  j["truncated"] = s.truncated;
  j["difficult"] = s.difficult;
  j["group_id"] = s.group_id ? nlohmann::ordered_json(*s.group_id) : nlohmann::ordered_json();
  j["feature_ref"] =
      s.feature_ref ? nlohmann::ordered_json(*s.feature_ref) : nlohmann::ordered_json();
  j["image_size"] = {dims.width, dims.height};
  return j.dump();
}

inline void write_dataset(std::ostream& out, const Dataset& d) {
  for (const auto& s : d.samples()) out << sample_to_json_line(s, d.dims_of(s)) << '\n';
}

inline std::string dataset_to_string(const Dataset& d) {
  std::ostringstream os;
  write_dataset(os, d);
  return os.str();
}

inline Dataset parse_dataset(std::istream& in, std::string name, std::string_view source) {
  std::vector<Sample> samples;
  std::map<std::string, ImageSize> dims;
  detail::for_each_json_line(in, source, [&](const nlohmann::json& j, std::size_t lineno) {
    Sample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.image_id = j.at("image_id").get<std::string>();
    s.class_label = j.at("class").get<std::string>();
    const auto& b = j.at("box");
    if (!b.is_array() || b.size() != 4) {
      throw DataError(std::string(source) + ":" + std::to_string(lineno) +
                      ": box must be [x_min,y_min,x_max,y_max]");
    }
    s.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    s.truncated = j.value("truncated", false);
    s.difficult = j.value("difficult", false);
    s.group_id = detail::optional_string(j, "group_id");
    s.feature_ref = detail::optional_string(j, "feature_ref");
    const auto& sz = j.at("image_size");
    if (!sz.is_array() || sz.size() != 2) {
      throw DataError(std::string(source) + ":" + std::to_string(lineno) +
                      ": image_size must be [width,height]");
    }
    const ImageSize isz{sz[0].get<int>(), sz[1].get<int>()};
    auto [it, inserted] = dims.emplace(s.image_id, isz);
    if (!inserted && !(it->second == isz)) {
      throw DataError(std::string(source) + ":" + std::to_string(lineno) +
                      ": conflicting image_size for image '" + s.image_id + "'");
    }
    samples.push_back(std::move(s));
  });
  return Dataset(std::move(name), std::move(samples), std::move(dims));
}

inline Dataset load_dataset(const std::filesystem::path& path, std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset manifest " + path.string());
  if (name.empty()) name = path.stem().string();
  return parse_dataset(in, std::move(name), path.string());
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_dataset(out, d);
}

// ---------------------------------------------------------------- split

inline void write_manifest(std::ostream& out, const SplitManifest& m) {
  nlohmann::ordered_json h;
  h["source_dataset"] = m.source_dataset;
  h["stage"] = stage_name(m.stage);
  h["seed"] = m.seed;
  h["rng"] = kRngName;
  h["transform_params"] = m.transform_params;
  h["count"] = m.sample_ids.size();
  out << h.dump() << '\n';
  for (const auto& id : m.sample_ids) {
    nlohmann::ordered_json j;
    j["sample_id"] = id;
    out << j.dump() << '\n';
  }
}

inline std::string manifest_to_string(const SplitManifest& m) {
  std::ostringstream os;
  write_manifest(os, m);
  return os.str();
}

inline SplitManifest parse_manifest(std::istream& in, std::string_view source) {
  SplitManifest m;
  bool have_header = false;
  std::size_t declared = 0;
  std::set<std::string> seen;
  detail::for_each_json_line(in, source, [&](const nlohmann::json& j, std::size_t lineno) {
    if (!have_header) {
      m.source_dataset = j.at("source_dataset").get<std::string>();
      m.stage = parse_stage(j.at("stage").get<std::string>());
      m.seed = j.at("seed").get<std::uint64_t>();
      const auto rng = j.value("rng", std::string(kRngName));
      if (rng != kRngName) {
        throw DataError(std::string(source) + ": unsupported rng '" + rng + "'");
      }
      m.transform_params = j.value("transform_params", nlohmann::json::object());
      declared = j.at("count").get<std::size_t>();
      have_header = true;
      return;
    }
    auto id = j.at("sample_id").get<std::string>();
    if (!seen.insert(id).second) {
      throw DataError(std::string(source) + ":" + std::to_string(lineno) +
                      ": duplicate sample_id '" + id + "'");
    }
    m.sample_ids.push_back(std::move(id));
  });
  if (!have_header) throw DataError(std::string(source) + ": missing manifest header");
  if (declared != m.sample_ids.size()) {
    throw DataError(std::string(source) + ": header declares " + std::to_string(declared) +
                    " samples, found " + std::to_string(m.sample_ids.size()));
  }
  return m;
}

inline SplitManifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return parse_manifest(in, path.string());
}

inline void save_manifest(const std::filesystem::path& path, const SplitManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_manifest(out, m);
}

// Resolves a manifest against the loaded datasets: the source dataset must be
// known and every sample id must exist in it.
inline Dataset link_manifest(const SplitManifest& m,
                             const std::map<std::string, const Dataset*>& datasets) {
  auto it = datasets.find(m.source_dataset);
  if (it == datasets.end() || it->second == nullptr) {
    throw DataError("unresolved reference: manifest source dataset '" + m.source_dataset +
                    "' is not loaded");
  }
  const Dataset& d = *it->second;
  for (const auto& id : m.sample_ids) {
    if (d.find(id) == nullptr) {
      throw DataError("unresolved reference: sample '" + id + "' not in dataset '" +
                      m.source_dataset + "'");
    }
  }
  return d.subset(m.sample_ids);
}

// Manifest listing every sample of a dataset (used to echo pipeline inputs).
inline SplitManifest full_manifest(const Dataset& d, std::uint64_t seed) {
  SplitManifest m;
  m.source_dataset = d.name();
  m.stage = Stage::input;
  m.seed = seed;
  for (const auto& s : d.samples()) m.sample_ids.push_back(s.sample_id);
  return m;
}

}  // namespace dshift
