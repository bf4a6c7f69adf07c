#pragma once

// Synthetic two-domain benchmark.
//
// Each class sits at its own centre on the x axis; its samples are drawn from
// a mixture of 2-D Gaussian "aspects" around that centre. The two domains
// differ in duplicate rate, blur and aspect weights. Features are the 2-D
// coordinates; images are noise textures (blurred in a domain with
// blur_sigma > 0). A nearest-centroid classifier stands in for a detector.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dshift/common/error.hpp"
#include "dshift/common/random.hpp"
#include "dshift/corpus/features.hpp"
#include "dshift/corpus/manifest.hpp"
#include "dshift/corpus/types.hpp"
#include "dshift/pipeline/config.hpp"
#include "dshift/pipeline/pipeline.hpp"
#include "dshift/quality/blur.hpp"
#include "dshift/quality/png_io.hpp"
#include "dshift/quality/raster.hpp"

namespace dshift {

struct DomainSpec {
  std::string name;
  std::size_t train_per_class = 0;
  double duplicate_rate = 0.0;
  double blur_sigma = 0.0;
  std::vector<double> aspect_weights;
};

struct SynthSpec {
  std::vector<std::string> classes{"alpha", "beta", "gamma"};
  double class_spacing = 6.0;
  std::vector<Point2> aspect_offsets{{0.0, 0.0}, {2.5, 0.0}, {-2.5, 0.0}};
  double aspect_spread = 0.7;
  double duplicate_jitter = 0.02;
  std::size_t test_per_class = 200;
  int image_size = 40;
  int object_margin = 4;
  DomainSpec a{"stills", 160, 0.05, 0.0, {0.4, 0.6, 0.0}};
  DomainSpec b{"frames", 200, 0.5, 1.5, {0.4, 0.0, 0.6}};
  std::uint64_t seed = 2016;
  double required_gap_reduction = 0.3;
  double epsilon = kDefaultEpsilon;

  void validate() const {
    if (classes.empty()) throw UsageError("synth spec needs at least one class");
    if (aspect_offsets.empty()) throw UsageError("synth spec needs at least one aspect");
    if (!(aspect_spread > 0.0)) throw UsageError("aspect_spread must be > 0");
    if (!(duplicate_jitter >= 0.0)) throw UsageError("duplicate_jitter must be >= 0");
    if (image_size <= 2 * object_margin) throw UsageError("image_size must exceed twice object_margin");
    for (const DomainSpec* d : {&a, &b}) {
      if (d->name.empty()) throw UsageError("synth domains need names");
      if (d->train_per_class == 0) throw UsageError("train_per_class must be > 0");
      if (!(d->duplicate_rate >= 0.0 && d->duplicate_rate < 1.0)) {
        throw UsageError(d->name + ": duplicate_rate must lie in [0, 1)");
      }
      if (!(d->blur_sigma >= 0.0)) throw UsageError(d->name + ": blur_sigma must be >= 0");
      if (d->aspect_weights.size() != aspect_offsets.size()) {
        throw UsageError(d->name + ": need one aspect weight per aspect offset");
      }
      double sum = 0.0;
      for (double w : d->aspect_weights) {
        if (!(w >= 0.0 && w <= 1.0)) throw UsageError(d->name + ": aspect weights must lie in [0, 1]");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw UsageError(d->name + ": aspect weights must sum to 1");
    }
    if (a.name == b.name) throw UsageError("synth domain names must differ");
  }
};

namespace detail {

inline DomainSpec read_domain(const toml::table& root, const char* key, DomainSpec d) {
  const toml::table* t = root[key].as_table();
  if (t == nullptr) return d;
  d.name = (*t)["name"].value_or(d.name);
  if (auto v = (*t)["train_per_class"].value<std::int64_t>()) {
    if (*v <= 0) throw UsageError(std::string(key) + ".train_per_class must be > 0");
    d.train_per_class = std::size_t(*v);
  }
  d.duplicate_rate = (*t)["duplicate_rate"].value_or(d.duplicate_rate);
  d.blur_sigma = (*t)["blur_sigma"].value_or(d.blur_sigma);
  if (const toml::array* w = (*t)["aspect_weights"].as_array()) {
    d.aspect_weights.clear();
    for (const auto& n : *w) {
      auto v = n.value<double>();
      if (!v) throw UsageError(std::string(key) + ".aspect_weights must be numbers");
      d.aspect_weights.push_back(*v);
    }
  }
  return d;
}

}  // namespace detail

inline SynthSpec parse_synth_spec(const toml::table& root) {
  SynthSpec s;
  if (const toml::array* c = root["classes"].as_array()) {
    s.classes.clear();
    for (const auto& n : *c) {
      auto v = n.value<std::string>();
      if (!v) throw UsageError("classes must be strings");
      s.classes.push_back(*v);
    }
  }
  s.class_spacing = root["class_spacing"].value_or(s.class_spacing);
  if (const toml::array* o = root["aspect_offsets"].as_array()) {
    s.aspect_offsets.clear();
    for (const auto& n : *o) {
      const toml::array* xy = n.as_array();
      if (xy == nullptr || xy->size() != 2) throw UsageError("aspect_offsets entries must be [x, y]");
      auto x = (*xy)[0].value<double>();
      auto y = (*xy)[1].value<double>();
      if (!x || !y) throw UsageError("aspect_offsets entries must be numbers");
      s.aspect_offsets.push_back({*x, *y});
    }
  }
  s.aspect_spread = root["aspect_spread"].value_or(s.aspect_spread);
  s.duplicate_jitter = root["duplicate_jitter"].value_or(s.duplicate_jitter);
  if (auto v = root["test_per_class"].value<std::int64_t>()) s.test_per_class = std::size_t(std::max<std::int64_t>(*v, 0));
  s.image_size = int(root["image_size"].value_or(std::int64_t{s.image_size}));
  s.object_margin = int(root["object_margin"].value_or(std::int64_t{s.object_margin}));
  if (auto v = root["seed"].value<std::int64_t>()) s.seed = static_cast<std::uint64_t>(*v);
  s.required_gap_reduction = root["required_gap_reduction"].value_or(s.required_gap_reduction);
  s.epsilon = root["epsilon"].value_or(s.epsilon);
  s.a = detail::read_domain(root, "domain_a", s.a);
  s.b = detail::read_domain(root, "domain_b", s.b);
  s.validate();
  return s;
}

inline SynthSpec load_synth_spec(const std::filesystem::path& path) {
  try {
    return parse_synth_spec(toml::parse_file(path.string()));
  } catch (const toml::parse_error& e) {
    throw UsageError(path.string() + ":" + std::to_string(e.source().begin.line) + ": " +
                     std::string(e.description()));
  }
}

// One generated domain: training set with images, test set (features only).
struct SynthDomain {
  Dataset train;
  Dataset test;
  std::map<std::string, RasterImage> images;  // by image_id, training set only
};

namespace detail {

inline Point2 class_centre(const SynthSpec& s, std::size_t c) {
  return {s.class_spacing * double(c), 0.0};
}

inline std::size_t pick_aspect(const std::vector<double>& w, Rng& rng) {
  const double u = rng.uniform();
  double run = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    last = i;
    run += w[i];
    if (u < run) return i;
  }
  return last;
}

inline Point2 draw_point(const SynthSpec& s, const DomainSpec& d, std::size_t c, Rng& rng) {
  const Point2 centre = class_centre(s, c);
  const Point2& off = s.aspect_offsets[pick_aspect(d.aspect_weights, rng)];
  const double x = centre[0] + off[0] + s.aspect_spread * rng.normal();
  const double y = centre[1] + off[1] + s.aspect_spread * rng.normal();
  return {x, y};
}

inline RasterImage noise_texture(int size, Rng& rng) {
  std::vector<double> px(std::size_t(size) * std::size_t(size));
  for (double& v : px) v = 0.2 + 0.6 * rng.uniform();
  return {size, size, 1, std::move(px)};
}

inline RasterImage jittered(const RasterImage& img, Rng& rng) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (double& v : px) v = std::clamp(v + 0.02 * (rng.uniform() - 0.5), 0.0, 1.0);
  return {img.width(), img.height(), img.channels(), std::move(px)};
}

struct ClassDraw {
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::vector<std::pair<std::string, RasterImage>> images;
};

inline ClassDraw draw_class(const SynthSpec& s, const DomainSpec& d, std::size_t c, bool with_images) {
  const std::string& cls = s.classes[c];
  Rng rng(derive_seed(s.seed, "synth/" + d.name, cls));
  ClassDraw out;
  const std::size_t n = d.train_per_class;
  const auto n_dup = static_cast<std::size_t>(std::llround(d.duplicate_rate * double(n)));
  const std::size_t n_orig = std::max<std::size_t>(n - n_dup, 1);
  const BoundingBox box{double(s.object_margin), double(s.object_margin), double(s.image_size - s.object_margin),
                        double(s.image_size - s.object_margin)};

  std::vector<Point2> origin_xy;
  std::vector<RasterImage> origin_img;
  for (std::size_t i = 0; i < n; ++i) {
    char idbuf[64];
    std::snprintf(idbuf, sizeof idbuf, "%s-%s-%04zu", d.name.c_str(), cls.c_str(), i);
    Sample smp;
    smp.sample_id = idbuf;
    smp.image_id = idbuf;
    smp.class_label = cls;
    smp.box = box;
    std::size_t group = 0;
    Point2 xy{};
    RasterImage img;
    if (i < n_orig) {
      group = i;
      xy = draw_point(s, d, c, rng);
      origin_xy.push_back(xy);
      if (with_images) {
        origin_img.push_back(noise_texture(s.image_size, rng));
        img = origin_img.back();
      }
    } else {
      group = std::size_t(rng.below(n_orig));
      xy = {origin_xy[group][0] + s.duplicate_jitter * rng.normal(),
            origin_xy[group][1] + s.duplicate_jitter * rng.normal()};
      if (with_images) img = jittered(origin_img[group], rng);
    }
    char gbuf[64];
    std::snprintf(gbuf, sizeof gbuf, "%s-g%04zu", cls.c_str(), group);
    smp.group_id = gbuf;
    smp.feature = std::vector<float>{float(xy[0]), float(xy[1])};
    if (with_images) {
      if (d.blur_sigma > 0.0) img = gaussian_blur(img, d.blur_sigma);
      out.images.emplace_back(smp.image_id, std::move(img));
    }
    out.train.push_back(std::move(smp));
  }
  for (std::size_t i = 0; i < s.test_per_class; ++i) {
    char idbuf[64];
    std::snprintf(idbuf, sizeof idbuf, "%s-test-%s-%04zu", d.name.c_str(), cls.c_str(), i);
    Sample smp;
    smp.sample_id = idbuf;
    smp.image_id = idbuf;
    smp.class_label = cls;
    smp.box = box;
    const Point2 xy = draw_point(s, d, c, rng);
    smp.feature = std::vector<float>{float(xy[0]), float(xy[1])};
    out.test.push_back(std::move(smp));
  }
  return out;
}

inline SynthDomain generate_domain(const SynthSpec& s, const DomainSpec& d, bool with_images) {
  std::vector<std::string> idx;
  for (std::size_t c = 0; c < s.classes.size(); ++c) idx.push_back(std::to_string(c));
  auto draws = per_class(idx, [&](const std::string& c) { return draw_class(s, d, std::stoul(c), with_images); });
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::map<std::string, ImageSize> dims;
  SynthDomain out;
  for (auto& dr : draws) {
    for (auto& smp : dr.train) {
      dims[smp.image_id] = {s.image_size, s.image_size};
      train.push_back(std::move(smp));
    }
    for (auto& smp : dr.test) {
      dims[smp.image_id] = {s.image_size, s.image_size};
      test.push_back(std::move(smp));
    }
    for (auto& [id, img] : dr.images) out.images.emplace(id, std::move(img));
  }
  std::map<std::string, ImageSize> train_dims;
  std::map<std::string, ImageSize> test_dims;
  for (const auto& smp : train) train_dims[smp.image_id] = dims[smp.image_id];
  for (const auto& smp : test) test_dims[smp.image_id] = dims[smp.image_id];
  out.train = Dataset(d.name, std::move(train), std::move(train_dims));
  out.test = Dataset(d.name + "_test", std::move(test), std::move(test_dims));
  return out;
}

}  // namespace detail

struct SynthPair {
  SynthDomain a;
  SynthDomain b;
};

// Both domains of a spec. with_images = false skips texture synthesis.
inline SynthPair generate_pair(const SynthSpec& spec, bool with_images = true) {
  spec.validate();
  return {detail::generate_domain(spec, spec.a, with_images), detail::generate_domain(spec, spec.b, with_images)};
}

// ---------------------------------------------------------------- proxy

struct GapResult {
  // accuracy[train][test], index 0 = domain A, 1 = domain B
  std::array<std::array<double, 2>, 2> accuracy{};
  std::vector<std::string> skipped_classes;

  double gap_a() const { return accuracy[0][0] - accuracy[1][0]; }
  double gap_b() const { return accuracy[1][1] - accuracy[0][1]; }
};

namespace detail {

using Centroids = std::map<std::string, std::vector<double>>;

inline Centroids class_centroids(const Dataset& d) {
  Centroids out;
  std::map<std::string, std::size_t> counts;
  for (const auto& s : d.samples()) {
    if (!s.feature) throw DataError(d.name() + ": sample '" + s.sample_id + "' has no features");
    auto& c = out[class_key(s.class_label)];
    if (c.empty()) c.assign(s.feature->size(), 0.0);
    if (c.size() != s.feature->size()) throw DataError(d.name() + ": feature dimensions differ");
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += (*s.feature)[k];
    ++counts[class_key(s.class_label)];
  }
  for (auto& [cls, c] : out) {
    for (double& v : c) v /= double(counts[cls]);
  }
  return out;
}

inline double centroid_accuracy(const Centroids& cent, const Dataset& test, const std::set<std::string>& classes) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& s : test.samples()) {
    const std::string key = class_key(s.class_label);
    if (classes.count(key) == 0u) continue;
    if (!s.feature) throw DataError(test.name() + ": sample '" + s.sample_id + "' has no features");
    const std::string* best = nullptr;
    double best_d = 0.0;
    for (const auto& cls : classes) {
      const auto& c = cent.at(cls);
      if (c.size() != s.feature->size()) throw DataError(test.name() + ": feature dimensions differ");
      double dist = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) {
        const double diff = (*s.feature)[k] - c[k];
        dist += diff * diff;
      }
      if (best == nullptr || dist < best_d) {
        best = &cls;
        best_d = dist;
      }
    }
    ++total;
    if (*best == key) ++correct;
  }
  return total == 0 ? 0.0 : double(correct) / double(total);
}

}  // namespace detail

// Nearest-centroid accuracy for every train/test domain combination. Classes
// missing from either training set are skipped and listed.
inline GapResult proxy_gap(const Dataset& train_a, const Dataset& train_b, const Dataset& test_a,
                           const Dataset& test_b) {
  const auto ca = detail::class_centroids(train_a);
  const auto cb = detail::class_centroids(train_b);
  GapResult r;
  std::set<std::string> classes;
  std::set<std::string> all;
  for (const auto& [k, _] : ca) all.insert(k);
  for (const auto& [k, _] : cb) all.insert(k);
  for (const Dataset* t : {&test_a, &test_b}) {
    for (const auto& [k, _] : t->by_class()) all.insert(k);
  }
  for (const auto& k : all) {
    if (ca.count(k) != 0u && cb.count(k) != 0u) {
      classes.insert(k);
    } else {
      r.skipped_classes.push_back(k);
    }
  }
  if (classes.empty()) throw DataError("proxy_gap: the training sets share no class");
  const std::array<const detail::Centroids*, 2> train{&ca, &cb};
  const std::array<const Dataset*, 2> test{&test_a, &test_b};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) r.accuracy[i][j] = detail::centroid_accuracy(*train[i], *test[j], classes);
  }
  return r;
}

// ---------------------------------------------------------------- files

struct SynthFiles {
  std::filesystem::path dir;
  std::filesystem::path config;  // pipeline TOML
  std::filesystem::path train_a, train_b, test_a, test_b;
};

namespace detail {

inline void write_domain(const SynthDomain& d, const std::filesystem::path& dir, const std::string& stem,
                         bool images) {
  auto with_refs = [](const Dataset& ds, const std::string& ref, FeatureMatrix& fm) {
    std::vector<Sample> samples = ds.samples();
    fm.dim = 2;
    for (auto& s : samples) {
      fm.ids.push_back(s.sample_id);
      fm.values.insert(fm.values.end(), s.feature->begin(), s.feature->end());
      s.feature_ref = ref;
      s.feature.reset();
    }
    return ds.with_samples(std::move(samples));
  };
  FeatureMatrix ftrain;
  FeatureMatrix ftest;
  save_dataset(dir / (stem + ".jsonl"), with_refs(d.train, stem + ".features", ftrain));
  save_features(dir / (stem + ".features"), ftrain);
  save_dataset(dir / (stem + "_test.jsonl"), with_refs(d.test, stem + "_test.features", ftest));
  save_features(dir / (stem + "_test.features"), ftest);
  if (images) {
    const auto img_dir = dir / ("images_" + stem);
    std::filesystem::create_directories(img_dir);
    for (const auto& [id, img] : d.images) write_png(img_dir / (id + ".png"), img);
  }
}

}  // namespace detail

// Writes the pair in the regular dataset, feature and image formats plus a
// pipeline config that runs every stage on it.
inline SynthFiles write_pair(const SynthPair& p, const SynthSpec& spec, const std::filesystem::path& dir,
                             const std::filesystem::path& pipeline_out) {
  std::filesystem::create_directories(dir);
  const bool images = !p.a.images.empty() && !p.b.images.empty();
  detail::write_domain(p.a, dir, spec.a.name, images);
  detail::write_domain(p.b, dir, spec.b.name, images);

  toml::table cfg;
  cfg.insert("seed", std::int64_t(spec.seed));
  cfg.insert("out", std::filesystem::absolute(pipeline_out).string());
  toml::array stages;
  for (const char* s : {"counts", "unique", "blur", "aspects"}) {
    if (!images && std::string_view(s) == "blur") continue;
    stages.push_back(s);
  }
  cfg.insert("stages", stages);
  auto side = [&](const DomainSpec& d) {
    toml::table t;
    t.insert("name", d.name);
    t.insert("manifest", d.name + ".jsonl");
    if (images) t.insert("images", "images_" + d.name);
    return t;
  };
  cfg.insert("dataset_a", side(spec.a));
  cfg.insert("dataset_b", side(spec.b));
  toml::table blur;
  blur.insert("kind", "gaussian");
  blur.insert("write_images", false);
  cfg.insert("blur", blur);
  toml::table aspects;
  aspects.insert("epsilon", spec.epsilon);
  cfg.insert("aspects", aspects);

  SynthFiles f;
  f.dir = dir;
  f.config = dir / "pipeline.toml";
  f.train_a = dir / (spec.a.name + ".jsonl");
  f.train_b = dir / (spec.b.name + ".jsonl");
  f.test_a = dir / (spec.a.name + "_test.jsonl");
  f.test_b = dir / (spec.b.name + "_test.jsonl");
  std::ostringstream os;
  os << cfg << '\n';
  write_text_file(f.config, os.str());
  return f;
}

// ---------------------------------------------------------------- harness

struct SynthbenchResult {
  GapResult before;
  GapResult after;
  std::vector<StageSizes> sizes;
  double reduction_a = 0.0;  // relative gap decrease, test domain A
  double reduction_b = 0.0;
  bool sizes_monotone = false;
  bool sizes_equal = false;
  double required_reduction = 0.3;
  Warnings warnings;

  bool passed() const {
    return sizes_monotone && sizes_equal && reduction_a >= required_reduction &&
           reduction_b >= required_reduction;
  }
};

inline double relative_reduction(double before, double after) {
  if (!(before > 0.0)) return after <= before ? 0.0 : -1.0;
  return (before - after) / before;
}

inline nlohmann::ordered_json synthbench_json(const SynthbenchResult& r) {
  auto gap = [](const GapResult& g) {
    nlohmann::ordered_json j;
    j["acc_trainA_testA"] = g.accuracy[0][0];
    j["acc_trainB_testA"] = g.accuracy[1][0];
    j["acc_trainB_testB"] = g.accuracy[1][1];
    j["acc_trainA_testB"] = g.accuracy[0][1];
    j["gap_testA"] = g.gap_a();
    j["gap_testB"] = g.gap_b();
    j["skipped_classes"] = g.skipped_classes;
    return j;
  };
  nlohmann::ordered_json j;
  j["before"] = gap(r.before);
  j["after"] = gap(r.after);
  j["reduction_testA"] = r.reduction_a;
  j["reduction_testB"] = r.reduction_b;
  j["required_reduction"] = r.required_reduction;
  j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : r.sizes) j["stages"].push_back({{"stage", s.stage}, {"a", s.a}, {"b", s.b}});
  j["sizes_monotone"] = r.sizes_monotone;
  j["sizes_equal"] = r.sizes_equal;
  j["passed"] = r.passed();
  j["warnings"] = r.warnings;
  return j;
}

// Generates the pair under <out>/data, runs the pipeline from the written
// files into <out>/pipeline and compares the proxy gap before and after.
inline SynthbenchResult run_synthbench(const SynthSpec& spec, const std::filesystem::path& out,
                                       bool with_images = true) {
  const SynthPair pair = generate_pair(spec, with_images);
  const SynthFiles files = write_pair(pair, spec, out / "data", out / "pipeline");
  const PipelineConfig cfg = load_config(files.config);
  const Dataset train_a = load_pipeline_dataset(cfg.a);
  const Dataset train_b = load_pipeline_dataset(cfg.b);
  const Dataset test_a = attach_features(load_dataset(files.test_a), files.dir);
  const Dataset test_b = attach_features(load_dataset(files.test_b), files.dir);
  const PipelineResult res = run_pipeline(cfg, train_a, train_b);

  SynthbenchResult r;
  r.required_reduction = spec.required_gap_reduction;
  r.warnings = res.warnings;
  r.sizes = stage_sizes(res);
  r.before = proxy_gap(train_a, train_b, test_a, test_b);
  const StageResult& last = res.final_stage();
  r.after = proxy_gap(train_a.subset(last.a.sample_ids), train_b.subset(last.b.sample_ids), test_a, test_b);
  r.reduction_a = relative_reduction(r.before.gap_a(), r.after.gap_a());
  r.reduction_b = relative_reduction(r.before.gap_b(), r.after.gap_b());

  r.sizes_monotone = true;
  r.sizes_equal = true;
  for (std::size_t i = 1; i < r.sizes.size(); ++i) {
    r.sizes_monotone = r.sizes_monotone && r.sizes[i].a <= r.sizes[i - 1].a && r.sizes[i].b <= r.sizes[i - 1].b;
    r.sizes_equal = r.sizes_equal && r.sizes[i].a == r.sizes[i].b;
  }
  write_text_file(out / "synthbench.json", synthbench_json(r).dump(2) + "\n");
  return r;
}

}  // namespace dshift
