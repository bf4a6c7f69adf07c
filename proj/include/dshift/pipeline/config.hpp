#pragma once

// Pipeline configuration (TOML). Relative paths resolve against the config
// file's directory.
//
//   seed = 2016
//   out = "runs/voc-yto"
//   stages = ["counts", "unique", "blur", "aspects"]
//
//   [dataset_a]                 # the side that gets blurred
//   name = "voc"
//   manifest = "voc/train.jsonl"
//   images = "voc/images"       # <images>/<image_id>.png, needed by "blur"
//   embeddings = "voc/emb"      # optional <embeddings>/<class>.csv
//
//   [dataset_b]
//   ...
//
//   [unique]
//   threshold = 0.35            # only needed when samples lack group_id
//
//   [blur]
//   kind = "motion"             # or "gaussian"
//   write_images = true
//
//   [aspects]
//   epsilon = 0.1
//   kl = "paired"               # or "plugin"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#define TOML_EXCEPTIONS 1
#include <toml++/toml.hpp>

#include "dshift/aspects/divergence.hpp"
#include "dshift/aspects/greedy_match.hpp"
#include "dshift/common/error.hpp"
#include "dshift/corpus/manifest.hpp"
#include "dshift/quality/blur.hpp"

namespace dshift {

enum class PipelineStage { counts, unique, blur, aspects };

inline std::string_view pipeline_stage_name(PipelineStage s) {
  switch (s) {
    case PipelineStage::counts: return "counts";
    case PipelineStage::unique: return "unique";
    case PipelineStage::blur: return "blur";
    case PipelineStage::aspects: return "aspects";
  }
  return "counts";
}

inline PipelineStage parse_pipeline_stage(std::string_view s) {
  for (auto st : {PipelineStage::counts, PipelineStage::unique, PipelineStage::blur, PipelineStage::aspects}) {
    if (pipeline_stage_name(st) == s) return st;
  }
  throw UsageError("unknown stage '" + std::string(s) + "' (expected counts, unique, blur or aspects)");
}

// Manifest tag written by each stage.
inline Stage manifest_stage(PipelineStage s) {
  switch (s) {
    case PipelineStage::counts: return Stage::counts;
    case PipelineStage::unique: return Stage::unique;
    case PipelineStage::blur: return Stage::blurred;
    case PipelineStage::aspects: return Stage::aspects;
  }
  return Stage::counts;
}

struct DatasetInput {
  std::string name;
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> images;
  std::optional<std::filesystem::path> embeddings;
};

struct PipelineConfig {
  DatasetInput a;
  DatasetInput b;
  std::vector<PipelineStage> stages{PipelineStage::counts, PipelineStage::unique, PipelineStage::blur,
                                    PipelineStage::aspects};
  BlurKind blur_kind = BlurKind::motion;
  bool write_blurred_images = true;
  std::optional<double> group_threshold;
  double epsilon = kDefaultEpsilon;
  KlVariant kl_variant = KlVariant::paired;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";

  // Stages must follow counts -> unique -> blur -> aspects; skipping is fine.
  void validate() const {
    for (std::size_t i = 1; i < stages.size(); ++i) {
      if (static_cast<int>(stages[i]) <= static_cast<int>(stages[i - 1])) {
        throw UsageError("stages must follow the order counts, unique, blur, aspects without repeats");
      }
    }
    if (!(epsilon > 0.0)) throw UsageError("aspects.epsilon must be > 0");
    if (group_threshold && !(*group_threshold > 0.0)) throw UsageError("unique.threshold must be > 0");
    if (a.name.empty() || b.name.empty()) throw UsageError("both datasets need a name");
    if (a.name == b.name) throw UsageError("dataset names must differ");
  }
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline DatasetInput read_dataset_input(const toml::table& root, const char* key,
                                       const std::filesystem::path& base) {
  const toml::table* t = root[key].as_table();
  if (t == nullptr) throw UsageError(std::string("config is missing [") + key + "]");
  DatasetInput d;
  auto manifest = (*t)["manifest"].value<std::string>();
  if (!manifest) throw UsageError(std::string("[") + key + "] needs manifest");
  d.manifest = resolve(base, *manifest);
  d.name = (*t)["name"].value_or(d.manifest.stem().string());
  if (auto v = (*t)["images"].value<std::string>()) d.images = resolve(base, *v);
  if (auto v = (*t)["embeddings"].value<std::string>()) d.embeddings = resolve(base, *v);
  return d;
}

}  // namespace detail

inline PipelineConfig parse_config(const toml::table& root, const std::filesystem::path& base) {
  PipelineConfig c;
  c.a = detail::read_dataset_input(root, "dataset_a", base);
  c.b = detail::read_dataset_input(root, "dataset_b", base);
  if (auto seed = root["seed"].value<std::int64_t>()) c.seed = static_cast<std::uint64_t>(*seed);
  if (auto out = root["out"].value<std::string>()) c.out_dir = detail::resolve(base, *out);
  if (const toml::array* st = root["stages"].as_array()) {
    c.stages.clear();
    for (const auto& node : *st) {
      auto s = node.value<std::string>();
      if (!s) throw UsageError("stages must be strings");
      c.stages.push_back(parse_pipeline_stage(*s));
    }
  }
  if (auto t = root["unique"]["threshold"].value<double>()) c.group_threshold = *t;
  if (auto k = root["blur"]["kind"].value<std::string>()) c.blur_kind = parse_blur_kind(*k);
  c.write_blurred_images = root["blur"]["write_images"].value_or(true);
  c.epsilon = root["aspects"]["epsilon"].value_or(kDefaultEpsilon);
  if (auto v = root["aspects"]["kl"].value<std::string>()) c.kl_variant = parse_kl_variant(*v);
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw UsageError(path.string() + ":" + std::to_string(e.source().begin.line) + ": " +
                     std::string(e.description()));
  }
  return parse_config(root, path.parent_path());
}

}  // namespace dshift
