#pragma once

// Progressive equalization of two training sets.
//
// Stage 0 ("input") echoes both datasets. Every later stage works on the
// non-difficult samples kept by the previous one and writes, under
// <out>/<tag>/:
//   <name_a>.manifest.jsonl, <name_b>.manifest.jsonl   split manifests
//   report.csv, report.json                             per-class factor report
// plus stage extras (blurred images, d_KL curves). <out>/summary.json and
// <out>/sizes.svg tie the stages together.
//
// Randomness for stage s and class c comes from derive_seed(seed, s, c), so
// classes can run concurrently and partial re-runs reproduce.

#include <filesystem>
#include <future>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dshift/aspects/divergence.hpp"
#include "dshift/aspects/embedding.hpp"
#include "dshift/aspects/greedy_match.hpp"
#include "dshift/common/error.hpp"
#include "dshift/common/random.hpp"
#include "dshift/corpus/equalize.hpp"
#include "dshift/corpus/features.hpp"
#include "dshift/corpus/manifest.hpp"
#include "dshift/diversity/groups.hpp"
#include "dshift/pipeline/config.hpp"
#include "dshift/pipeline/report.hpp"
#include "dshift/quality/energy.hpp"
#include "dshift/quality/png_io.hpp"

namespace dshift {

struct StageResult {
  std::string tag;
  SplitManifest a;
  SplitManifest b;
  FactorReport report;
  std::map<std::string, AspectMatch> matches;  // aspects stage only
};

struct PipelineResult {
  std::vector<StageResult> stages;
  Warnings warnings;

  const StageResult& final_stage() const { return stages.back(); }
};

// File-name-safe form of an id.
inline std::string safe_file_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& image_id) {
  std::filesystem::path p(image_id);
  return p.has_extension() ? dir / p : dir / (image_id + ".png");
}

namespace detail {

[[noreturn]] inline void rethrow_in_stage(const Error& e, std::string_view stage) {
  const std::string msg = "stage " + std::string(stage) + ": " + e.what();
  if (dynamic_cast<const UsageError*>(&e)) throw UsageError(msg);
  if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
  throw DataError(msg);
}

// Classes present on both sides, by key, with sample indices.
struct SharedClasses {
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> classes;
  Warnings warnings;
};

inline SharedClasses shared_classes(const Dataset& a, const Dataset& b) {
  SharedClasses out;
  auto ca = a.by_class(false);
  auto cb = b.by_class(false);
  for (auto& [key, ia] : ca) {
    auto it = cb.find(key);
    if (it == cb.end()) {
      out.warnings.push_back("class '" + key + "' only in " + a.name() + "; excluded");
      continue;
    }
    out.classes[key] = {std::move(ia), std::move(it->second)};
  }
  for (const auto& [key, _] : cb) {
    if (ca.find(key) == ca.end()) out.warnings.push_back("class '" + key + "' only in " + b.name() + "; excluded");
  }
  return out;
}

inline SplitManifest make_manifest(const Dataset& d, Stage stage, std::uint64_t seed) {
  return {d.name(), stage, seed, {}, nlohmann::json::object()};
}

// Runs f(key) for every key concurrently and returns results in key order.
template <typename F>
auto per_class(const std::vector<std::string>& keys, F f) {
  using R = decltype(f(keys.front()));
  std::vector<std::future<R>> futures;
  futures.reserve(keys.size());
  for (const auto& k : keys) futures.push_back(std::async(std::launch::async, f, k));
  std::vector<R> out;
  out.reserve(keys.size());
  for (auto& fut : futures) out.push_back(fut.get());
  return out;
}

template <typename Map>
std::vector<std::string> keys_of(const Map& m) {
  std::vector<std::string> k;
  for (const auto& [key, _] : m) k.push_back(key);
  return k;
}

inline std::vector<FeatureRow> feature_rows(const Dataset& d, const std::vector<std::size_t>& idx) {
  std::vector<FeatureRow> rows;
  std::vector<std::string> missing;
  for (std::size_t i : idx) {
    const Sample& s = d.samples()[i];
    if (!s.feature) {
      missing.push_back(s.sample_id);
      continue;
    }
    rows.push_back({s.sample_id, *s.feature});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError(d.name() + ": missing features for: " + list);
  }
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------- stages

inline StageResult run_input_stage(const Dataset& a, const Dataset& b, std::uint64_t seed) {
  StageResult r;
  r.tag = "input";
  r.a = full_manifest(a, seed);
  r.b = full_manifest(b, seed);
  r.report.stage = "input";
  r.report.columns = {{"n_a", Aggregate::sum},         {"n_b", Aggregate::sum},
                      {"rel_size_a", Aggregate::mean}, {"rel_size_b", Aggregate::mean},
                      {"aspect_ratio_a", Aggregate::mean}, {"aspect_ratio_b", Aggregate::mean},
                      {"truncated_a", Aggregate::mean},    {"truncated_b", Aggregate::mean},
                      {"difficult_a", Aggregate::mean},    {"difficult_b", Aggregate::mean}};
  auto fill = [&](const Dataset& d, const char* side) {
    for (const auto& [key, idx] : d.by_class(true)) {
      std::vector<std::string> ids;
      for (std::size_t i : idx) ids.push_back(d.samples()[i].sample_id);
      const FramingStats st = framing_stats(d.subset(ids));
      const std::string s(side);
      r.report.set(key, "n_" + s, double(idx.size()));
      r.report.set(key, "rel_size_" + s, st.mean_relative_size);
      r.report.set(key, "aspect_ratio_" + s, st.mean_aspect_ratio);
      r.report.set(key, "truncated_" + s, st.frac_truncated);
      r.report.set(key, "difficult_" + s, st.frac_difficult);
    }
  };
  fill(a, "a");
  fill(b, "b");
  return r;
}

inline StageResult run_counts_stage(const Dataset& a, const Dataset& b, std::uint64_t seed) {
  CountEqualization eq = equalize_counts(a, b, seed);
  StageResult r;
  r.tag = "counts";
  r.a = std::move(eq.a);
  r.b = std::move(eq.b);
  r.report.stage = "counts";
  r.report.columns = {{"n_a", Aggregate::sum}, {"n_b", Aggregate::sum}, {"equalized", Aggregate::sum}};
  for (const auto& [key, c] : eq.per_class) {
    r.report.set(key, "n_a", double(c.a));
    r.report.set(key, "n_b", double(c.b));
    r.report.set(key, "equalized", double(c.kept));
  }
  r.report.warnings = std::move(eq.warnings);
  return r;
}

inline GroupSet class_groups(const Dataset& d, const std::vector<std::size_t>& idx, const std::string& key,
                             const std::optional<double>& threshold) {
  std::vector<const Sample*> samples;
  bool all_labelled = true;
  for (std::size_t i : idx) {
    samples.push_back(&d.samples()[i]);
    all_labelled = all_labelled && d.samples()[i].group_id.has_value();
  }
  if (all_labelled) return ingest_groups(key, samples);
  if (!threshold) {
    throw UsageError(d.name() + ": class '" + key +
                     "' has samples without group_id and no [unique] threshold is configured");
  }
  return group_near_identical(key, detail::feature_rows(d, idx), *threshold);
}

inline StageResult run_unique_stage(const Dataset& a, const Dataset& b, const PipelineConfig& cfg) {
  auto shared = detail::shared_classes(a, b);
  StageResult r;
  r.tag = "unique";
  r.a = detail::make_manifest(a, Stage::unique, cfg.seed);
  r.b = detail::make_manifest(b, Stage::unique, cfg.seed);
  r.report.stage = "unique";
  r.report.columns = {{"groups_a", Aggregate::mean}, {"groups_b", Aggregate::mean}, {"ratio_a", Aggregate::mean},
                      {"ratio_b", Aggregate::mean},  {"equalized", Aggregate::mean}};
  r.report.warnings = shared.warnings;

  struct ClassOut {
    GroupSet ga, gb;
    UniqueSelection sel;
  };
  const auto keys = detail::keys_of(shared.classes);
  auto results = detail::per_class(keys, [&](const std::string& key) {
    const auto& [ia, ib] = shared.classes.at(key);
    ClassOut o{class_groups(a, ia, key, cfg.group_threshold), class_groups(b, ib, key, cfg.group_threshold), {}};
    o.sel = unique_resample(o.ga, o.gb, derive_seed(cfg.seed, "unique", key));
    return o;
  });
  nlohmann::json origin_a = nlohmann::json::object();
  nlohmann::json origin_b = nlohmann::json::object();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& o = results[i];
    r.a.sample_ids.insert(r.a.sample_ids.end(), o.sel.a.begin(), o.sel.a.end());
    r.b.sample_ids.insert(r.b.sample_ids.end(), o.sel.b.begin(), o.sel.b.end());
    r.report.set(keys[i], "groups_a", double(o.ga.n_groups()));
    r.report.set(keys[i], "groups_b", double(o.gb.n_groups()));
    r.report.set(keys[i], "ratio_a", diversity_ratio(o.ga));
    r.report.set(keys[i], "ratio_b", diversity_ratio(o.gb));
    r.report.set(keys[i], "equalized", double(o.sel.a.size()));
    origin_a[keys[i]] = group_origin_name(o.ga.origin);
    origin_b[keys[i]] = group_origin_name(o.gb.origin);
  }
  r.a.transform_params["group_origin"] = origin_a;
  r.b.transform_params["group_origin"] = origin_b;
  return r;
}

namespace detail {

inline std::vector<BoxedImage> load_patches(const Dataset& d, const std::vector<std::size_t>& idx,
                                            const std::filesystem::path& dir) {
  std::vector<BoxedImage> items;
  std::map<std::string, RasterImage> cache;
  for (std::size_t i : idx) {
    const Sample& s = d.samples()[i];
    auto it = cache.find(s.image_id);
    if (it == cache.end()) it = cache.emplace(s.image_id, read_png(image_path(dir, s.image_id))).first;
    const ImageSize& dims = d.dims_of(s);
    if (it->second.width() != dims.width || it->second.height() != dims.height) {
      throw DataError(d.name() + ": image '" + s.image_id + "' size differs from its annotation");
    }
    items.push_back(make_patch(s.sample_id, it->second, s.box));
  }
  return items;
}

}  // namespace detail

// Blurs side A, per class, until its mean gradient energy matches side B.
inline StageResult run_blur_stage(const Dataset& a, const Dataset& b, const PipelineConfig& cfg,
                                  const std::filesystem::path& stage_dir) {
  if (!cfg.a.images || !cfg.b.images) throw UsageError("blur stage needs images for both datasets");
  auto shared = detail::shared_classes(a, b);
  StageResult r;
  r.tag = "blurred";
  r.a = detail::make_manifest(a, Stage::blurred, cfg.seed);
  r.b = detail::make_manifest(b, Stage::blurred, cfg.seed);
  r.report.stage = "blurred";
  r.report.columns = {{"energy_a", Aggregate::mean},
                      {"energy_b", Aggregate::mean},
                      {"param", Aggregate::mean},
                      {"energy_a_blurred", Aggregate::mean}};
  r.report.warnings = shared.warnings;

  struct ClassOut {
    double before = 0.0;
    double target = 0.0;
    BlurParam param;
    double after = 0.0;
    bool saturated = false;
    Warnings warnings;
  };
  const auto keys = detail::keys_of(shared.classes);
  auto results = detail::per_class(keys, [&](const std::string& key) {
    const auto& [ia, ib] = shared.classes.at(key);
    const auto items_a = detail::load_patches(a, ia, *cfg.a.images);
    const auto items_b = detail::load_patches(b, ib, *cfg.b.images);
    ClassOut o;
    o.target = measure_energy(items_b).mean;
    o.before = measure_energy(items_a).mean;
    if (o.before <= o.target * (1.0 + kEnergyRelTol)) {
      o.param = {cfg.blur_kind, cfg.blur_kind == BlurKind::gaussian ? 0.0 : 1.0};
      o.after = o.before;
      if (o.before < o.target * (1.0 - kEnergyRelTol)) {
        o.warnings.push_back(key + ": " + a.name() + " is already below the target energy; left unblurred");
      }
      return o;
    }
    EnergyEqualization eq = equalize_energy(items_a, o.target, cfg.blur_kind);
    o.param = eq.param;
    o.after = eq.after.mean;
    o.saturated = eq.saturated;
    for (auto& w : eq.warnings) o.warnings.push_back(key + ": " + w);
    return o;
  });

  nlohmann::json per_class = nlohmann::json::object();
  std::map<std::string, BlurParam> param_of;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& o = results[i];
    const auto& [ia, ib] = shared.classes.at(keys[i]);
    for (std::size_t k : ia) r.a.sample_ids.push_back(a.samples()[k].sample_id);
    for (std::size_t k : ib) r.b.sample_ids.push_back(b.samples()[k].sample_id);
    r.report.set(keys[i], "energy_a", o.before);
    r.report.set(keys[i], "energy_b", o.target);
    r.report.set(keys[i], "param", o.param.value);
    r.report.set(keys[i], "energy_a_blurred", o.after);
    r.report.warnings.insert(r.report.warnings.end(), o.warnings.begin(), o.warnings.end());
    per_class[keys[i]] = {{"param", o.param.value}, {"target_energy", o.target}, {"saturated", o.saturated}};
    param_of[keys[i]] = o.param;
  }
  r.a.transform_params["kind"] = blur_kind_name(cfg.blur_kind);
  r.a.transform_params["per_class"] = per_class;

  if (cfg.write_blurred_images) {
    const auto img_dir = stage_dir / "images";
    std::filesystem::create_directories(img_dir);
    r.a.transform_params["images"] = "images";
    detail::per_class(keys, [&](const std::string& key) {
      for (std::size_t k : shared.classes.at(key).first) {
        const Sample& s = a.samples()[k];
        const RasterImage img = read_png(image_path(*cfg.a.images, s.image_id));
        write_png(img_dir / (safe_file_name(s.sample_id) + ".png"), apply_blur(img, param_of.at(key)));
      }
      return 0;
    });
  }
  return r;
}

inline std::pair<EmbeddedSet, EmbeddedSet> class_embeddings(const Dataset& a, const std::vector<std::size_t>& ia,
                                                            const Dataset& b, const std::vector<std::size_t>& ib,
                                                            const std::string& key, const PipelineConfig& cfg,
                                                            Warnings& warnings) {
  if (cfg.a.embeddings && cfg.b.embeddings) {
    auto pick = [&](const Dataset& d, const std::vector<std::size_t>& idx, const std::filesystem::path& dir) {
      const auto file = dir / (safe_file_name(key) + ".csv");
      const EmbeddedSet all = read_embedding_csv(file.string(), key);
      std::map<std::string, Point2> by_id;
      for (const auto& p : all.points) by_id[p.sample_id] = p.xy;
      EmbeddedSet s{key, {}};
      for (std::size_t i : idx) {
        const auto& id = d.samples()[i].sample_id;
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError(file.string() + ": no embedding for sample '" + id + "'");
        s.points.push_back({id, it->second});
      }
      return s;
    };
    return {pick(a, ia, *cfg.a.embeddings), pick(b, ib, *cfg.b.embeddings)};
  }
  auto rows = detail::feature_rows(a, ia);
  auto rows_b = detail::feature_rows(b, ib);
  rows.insert(rows.end(), rows_b.begin(), rows_b.end());
  Reduction red = reduce_to_2d(key, rows);
  warnings.insert(warnings.end(), red.warnings.begin(), red.warnings.end());
  EmbeddedSet ea{key, {red.set.points.begin(), red.set.points.begin() + std::ptrdiff_t(ia.size())}};
  EmbeddedSet eb{key, {red.set.points.begin() + std::ptrdiff_t(ia.size()), red.set.points.end()}};
  return {std::move(ea), std::move(eb)};
}

inline StageResult run_aspects_stage(const Dataset& a, const Dataset& b, const PipelineConfig& cfg) {
  auto shared = detail::shared_classes(a, b);
  StageResult r;
  r.tag = "aspects";
  r.a = detail::make_manifest(a, Stage::aspects, cfg.seed);
  r.b = detail::make_manifest(b, Stage::aspects, cfg.seed);
  r.report.stage = "aspects";
  r.report.columns = {{"n_a", Aggregate::sum},      {"n_b", Aggregate::sum},        {"d_kl_before", Aggregate::mean},
                      {"selected", Aggregate::sum}, {"d_kl_after", Aggregate::mean}};
  r.report.warnings = shared.warnings;

  struct ClassOut {
    std::optional<double> before;
    AspectMatch match;
    Warnings warnings;
  };
  const auto keys = detail::keys_of(shared.classes);
  auto results = detail::per_class(keys, [&](const std::string& key) {
    const auto& [ia, ib] = shared.classes.at(key);
    ClassOut o;
    auto [ea, eb] = class_embeddings(a, ia, b, ib, key, cfg, o.warnings);
    if (ea.size() == eb.size()) o.before = sym_kl(ea, eb, cfg.kl_variant);
    o.match = greedy_aspect_match(ea, eb, cfg.epsilon, cfg.kl_variant);
    return o;
  });
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto& o = results[i];
    const auto& [ia, ib] = shared.classes.at(keys[i]);
    for (const auto& p : o.match.pairs) {
      r.a.sample_ids.push_back(p.id_a);
      r.b.sample_ids.push_back(p.id_b);
    }
    r.report.set(keys[i], "n_a", double(ia.size()));
    r.report.set(keys[i], "n_b", double(ib.size()));
    r.report.set(keys[i], "d_kl_before", o.before);
    r.report.set(keys[i], "selected", double(o.match.pairs.size()));
    r.report.set(keys[i], "d_kl_after", o.match.final_d_kl());
    r.report.warnings.insert(r.report.warnings.end(), o.warnings.begin(), o.warnings.end());
    r.report.warnings.insert(r.report.warnings.end(), o.match.warnings.begin(), o.match.warnings.end());
    r.matches.emplace(keys[i], std::move(o.match));
  }
  r.a.transform_params = {{"epsilon", cfg.epsilon}, {"kl", kl_variant_name(cfg.kl_variant)}};
  r.b.transform_params = r.a.transform_params;
  return r;
}

// ---------------------------------------------------------------- driver

inline void write_stage(const StageResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_manifest(dir / (safe_file_name(r.a.source_dataset) + ".manifest.jsonl"), r.a);
  save_manifest(dir / (safe_file_name(r.b.source_dataset) + ".manifest.jsonl"), r.b);
  emit_report(r.report, ReportFormat::csv, dir / "report.csv");
  emit_report(r.report, ReportFormat::json, dir / "report.json");
  if (!r.matches.empty()) {
    const auto curves = dir / "curves";
    std::filesystem::create_directories(curves);
    for (const auto& [cls, m] : r.matches) {
      std::ostringstream csv;
      write_curve_csv(csv, m);
      write_text_file(curves / (safe_file_name(cls) + ".csv"), csv.str());
      write_text_file(curves / (safe_file_name(cls) + ".svg"), curve_svg(m, "d_KL growth: " + cls));
    }
  }
}

inline nlohmann::ordered_json summary_json(const PipelineResult& res, const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["rng"] = kRngName;
  j["dataset_a"] = cfg.a.name;
  j["dataset_b"] = cfg.b.name;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : res.stages) {
    nlohmann::ordered_json js;
    js["stage"] = s.tag;
    js["a"] = {{"manifest", s.tag + "/" + safe_file_name(s.a.source_dataset) + ".manifest.jsonl"},
               {"count", s.a.size()}};
    js["b"] = {{"manifest", s.tag + "/" + safe_file_name(s.b.source_dataset) + ".manifest.jsonl"},
               {"count", s.b.size()}};
    js["report"] = s.tag + "/report.csv";
    j["stages"].push_back(std::move(js));
  }
  j["warnings"] = res.warnings;
  return j;
}

inline std::vector<StageSizes> stage_sizes(const PipelineResult& res) {
  std::vector<StageSizes> out;
  for (const auto& s : res.stages) out.push_back({s.tag, s.a.size(), s.b.size()});
  return out;
}

// Runs the configured stages on two already loaded datasets and writes all
// artifacts under cfg.out_dir. A failing stage aborts with its name; the
// outputs of earlier stages stay on disk.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset& data_a, const Dataset& data_b) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  PipelineResult res;

  res.stages.push_back(run_input_stage(data_a, data_b, cfg.seed));
  write_stage(res.stages.back(), cfg.out_dir / "input");

  auto non_difficult = [](const Dataset& d) {
    std::vector<std::string> ids;
    for (const auto& s : d.samples()) {
      if (!s.difficult) ids.push_back(s.sample_id);
    }
    return d.subset(ids);
  };
  Dataset cur_a = non_difficult(data_a);
  Dataset cur_b = non_difficult(data_b);

  for (PipelineStage st : cfg.stages) {
    const std::string tag(stage_name(manifest_stage(st)));
    const auto dir = cfg.out_dir / tag;
    StageResult r;
    try {
      switch (st) {
        case PipelineStage::counts: r = run_counts_stage(cur_a, cur_b, cfg.seed); break;
        case PipelineStage::unique: r = run_unique_stage(cur_a, cur_b, cfg); break;
        case PipelineStage::blur: r = run_blur_stage(cur_a, cur_b, cfg, dir); break;
        case PipelineStage::aspects: r = run_aspects_stage(cur_a, cur_b, cfg); break;
      }
      write_stage(r, dir);
    } catch (const Error& e) {
      detail::rethrow_in_stage(e, pipeline_stage_name(st));
    } catch (const std::filesystem::filesystem_error& e) {
      throw DataError("stage " + std::string(pipeline_stage_name(st)) + ": " + e.what());
    }
    for (const auto& w : r.report.warnings) res.warnings.push_back(tag + ": " + w);
    cur_a = data_a.subset(r.a.sample_ids);
    cur_b = data_b.subset(r.b.sample_ids);
    res.stages.push_back(std::move(r));
  }

  write_text_file(cfg.out_dir / "summary.json", summary_json(res, cfg).dump(2) + "\n");
  write_text_file(cfg.out_dir / "sizes.svg", sizes_svg(stage_sizes(res), cfg.a.name, cfg.b.name));
  return res;
}

inline Dataset load_pipeline_dataset(const DatasetInput& in) {
  Dataset d = load_dataset(in.manifest, in.name);
  bool has_refs = false;
  for (const auto& s : d.samples()) has_refs = has_refs || s.feature_ref.has_value();
  return has_refs ? attach_features(d, in.manifest.parent_path()) : d;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const Dataset a = load_pipeline_dataset(cfg.a);
  const Dataset b = load_pipeline_dataset(cfg.b);
  return run_pipeline(cfg, a, b);
}

}  // namespace dshift
