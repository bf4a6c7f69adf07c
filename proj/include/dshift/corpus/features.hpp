#pragma once

// Feature matrix files.
//
//   offset  size  field
//   0       4     magic "DSFM"
//   4       4     version (uint32, = 1)
//   8       8     rows (uint64)
//   16      4     dim (uint32)
//   20      ...   rows*dim float32, row-major
//
// All integers and floats are little-endian. Row r belongs to the id on line
// r+1 of the sidecar text file "<path>.ids".
//
// A sample's feature_ref names a feature file relative to the dataset
// manifest; its row is found by sample_id in the sidecar.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dshift/common/error.hpp"
#include "dshift/corpus/types.hpp"

namespace dshift {

static_assert(std::endian::native == std::endian::little,
              "feature files are read by direct little-endian copy");

inline constexpr std::array<char, 4> kFeatureMagic{'D', 'S', 'F', 'M'};
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureMatrix {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<float> values;  // ids.size() * dim

  std::size_t rows() const noexcept { return ids.size(); }
  const float* row(std::size_t r) const { return values.data() + r * dim; }
};

inline std::filesystem::path feature_ids_path(const std::filesystem::path& p) {
  return p.string() + ".ids";
}

inline void save_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (m.values.size() != m.ids.size() * m.dim) {
    throw DataError("feature matrix shape mismatch for " + path.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::uint64_t rows = m.ids.size();
  const auto dim = static_cast<std::uint32_t>(m.dim);
  out.write(kFeatureMagic.data(), 4);
  out.write(reinterpret_cast<const char*>(&kFeatureVersion), 4);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  std::ofstream ids(feature_ids_path(path), std::ios::binary);
  if (!ids) throw DataError("cannot write " + feature_ids_path(path).string());
  for (const auto& id : m.ids) ids << id << '\n';
}

inline FeatureMatrix load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  std::array<char, 4> magic{};
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint32_t dim = 0;
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in || magic != kFeatureMagic) throw DataError(path.string() + ": not a feature file");
  if (version != kFeatureVersion) {
    throw DataError(path.string() + ": unsupported feature file version " + std::to_string(version));
  }
  FeatureMatrix m;
  m.dim = dim;
  m.values.resize(rows * dim);
  in.read(reinterpret_cast<char*>(m.values.data()),
          static_cast<std::streamsize>(m.values.size() * sizeof(float)));
  if (!in) throw DataError(path.string() + ": truncated feature data");

  std::ifstream ids(feature_ids_path(path));
  if (!ids) throw DataError("missing sidecar id list " + feature_ids_path(path).string());
  std::string line;
  while (std::getline(ids, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) m.ids.push_back(line);
  }
  if (m.ids.size() != rows) {
    throw DataError(feature_ids_path(path).string() + ": " + std::to_string(m.ids.size()) +
                    " ids for " + std::to_string(rows) + " rows");
  }
  return m;
}

// Returns a copy of `d` with Sample::feature filled from each sample's
// feature_ref (resolved against `base_dir`). Samples without a feature_ref
// are left untouched.
inline Dataset attach_features(const Dataset& d, const std::filesystem::path& base_dir) {
  std::map<std::string, FeatureMatrix> files;
  std::map<std::string, std::unordered_map<std::string, std::size_t>> rows;
  std::vector<Sample> samples = d.samples();
  for (auto& s : samples) {
    if (!s.feature_ref) continue;
    const std::string& ref = *s.feature_ref;
    if (files.find(ref) == files.end()) {
      auto& fm = files[ref] = load_features(base_dir / ref);
      auto& r = rows[ref];
      for (std::size_t i = 0; i < fm.ids.size(); ++i) r.emplace(fm.ids[i], i);
    }
    const auto& fm = files[ref];
    auto it = rows[ref].find(s.sample_id);
    if (it == rows[ref].end()) {
      throw DataError("feature file " + ref + " has no row for sample '" + s.sample_id + "'");
    }
    s.feature = std::vector<float>(fm.row(it->second), fm.row(it->second) + fm.dim);
  }
  return d.with_samples(std::move(samples));
}

}  // namespace dshift
