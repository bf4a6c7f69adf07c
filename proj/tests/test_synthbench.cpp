#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dshift/synthbench/synthbench.hpp"

using namespace dshift;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dshift_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, double> ratios(const Dataset& d) {
  std::map<std::string, double> out;
  for (const auto& [cls, idx] : d.by_class()) {
    std::vector<const Sample*> s;
    for (std::size_t i : idx) s.push_back(&d.samples()[i]);
    out[cls] = diversity_ratio(ingest_groups(cls, s));
  }
  return out;
}

double mean_energy(const SynthDomain& d) {
  std::vector<BoxedImage> items;
  for (const auto& s : d.train.samples()) items.push_back({s.sample_id, d.images.at(s.image_id), s.box});
  return measure_energy(items).mean;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.a.train_per_class = 60;
  s.b.train_per_class = 80;
  s.test_per_class = 80;
  return s;
}

}  // namespace

TEST(SynthGenerate, ZeroDuplicateRateGivesDistinctGroups) {
  auto spec = small_spec();
  spec.a.duplicate_rate = 0.0;
  const auto p = generate_pair(spec, false);
  std::set<std::string> groups;
  for (const auto& s : p.a.train.samples()) EXPECT_TRUE(groups.insert(*s.group_id).second);
  for (const auto& [cls, r] : ratios(p.a.train)) EXPECT_DOUBLE_EQ(r, 1.0) << cls;
}

TEST(SynthGenerate, HalfDuplicateRate) {
  auto spec = small_spec();
  spec.b.train_per_class = 400;
  spec.b.duplicate_rate = 0.5;
  const auto p = generate_pair(spec, false);
  for (const auto& [cls, r] : ratios(p.b.train)) EXPECT_NEAR(r, 0.5, 0.05) << cls;
  EXPECT_EQ(p.b.train.size(), 3u * 400u);
}

TEST(SynthGenerate, DuplicatesStayCloseToTheirOriginal) {
  const auto p = generate_pair(small_spec(), true);
  std::map<std::string, const Sample*> first;
  for (const auto& s : p.b.train.samples()) {
    auto [it, fresh] = first.emplace(*s.group_id, &s);
    if (fresh) continue;
    const auto& f0 = *it->second->feature;
    EXPECT_LT(std::hypot(f0[0] - (*s.feature)[0], f0[1] - (*s.feature)[1]), 0.2);
    const auto& i0 = p.b.images.at(it->second->image_id);
    const auto& i1 = p.b.images.at(s.image_id);
    double diff = 0;
    for (std::size_t k = 0; k < i0.pixels().size(); ++k) diff = std::max(diff, std::fabs(i0.pixels()[k] - i1.pixels()[k]));
    EXPECT_LT(diff, 0.02);
  }
}

TEST(SynthGenerate, IdenticalDomainSpecsMeasureAlike) {
  auto spec = small_spec();
  spec.b = spec.a;
  spec.b.name = "twin";
  spec.a.duplicate_rate = spec.b.duplicate_rate = 0.3;
  const auto p = generate_pair(spec, true);
  EXPECT_EQ(ratios(p.a.train), ratios(p.b.train));
  const double ea = mean_energy(p.a), eb = mean_energy(p.b);
  EXPECT_NEAR(ea, eb, 0.02 * ea);
  const auto g = proxy_gap(p.a.train, p.b.train, p.a.test, p.b.test);
  EXPECT_NEAR(g.gap_a(), 0.0, 0.05);
  EXPECT_NEAR(g.gap_b(), 0.0, 0.05);
}

TEST(SynthGenerate, BlurLowersEnergy) {
  const auto p = generate_pair(small_spec(), true);
  EXPECT_LT(mean_energy(p.b), 0.8 * mean_energy(p.a));
}

TEST(SynthGenerate, Deterministic) {
  const auto p = generate_pair(small_spec(), true);
  const auto q = generate_pair(small_spec(), true);
  EXPECT_EQ(dataset_to_string(p.a.train), dataset_to_string(q.a.train));
  EXPECT_EQ(dataset_to_string(p.b.test), dataset_to_string(q.b.test));
  EXPECT_EQ(p.b.images.begin()->second, q.b.images.begin()->second);
  auto other = small_spec();
  other.seed = 1;
  EXPECT_NE(dataset_to_string(generate_pair(other, false).a.train), dataset_to_string(p.a.train));
}

TEST(SynthSpecs, ValidationAndToml) {
  auto s = small_spec();
  s.a.aspect_weights = {0.5, 0.6, 0.0};
  EXPECT_THROW(s.validate(), UsageError);
  s = small_spec();
  s.b.duplicate_rate = 1.0;
  EXPECT_THROW(s.validate(), UsageError);
  s = small_spec();
  s.b.aspect_weights = {1.0};
  EXPECT_THROW(s.validate(), UsageError);
  s = small_spec();
  s.b.name = s.a.name;
  EXPECT_THROW(s.validate(), UsageError);

  const auto shipped = load_synth_spec(fs::path(DSHIFT_SOURCE_DIR) / "configs" / "synthbench_default.toml");
  const SynthSpec defaults;
  EXPECT_EQ(shipped.seed, defaults.seed);
  EXPECT_EQ(shipped.classes, defaults.classes);
  EXPECT_EQ(shipped.a.aspect_weights, defaults.a.aspect_weights);
  EXPECT_EQ(shipped.b.train_per_class, defaults.b.train_per_class);
  EXPECT_DOUBLE_EQ(shipped.required_gap_reduction, 0.3);
  EXPECT_THROW(parse_synth_spec(toml::parse("[domain_a]\ntrain_per_class = 0\n")), UsageError);
}

TEST(ProxyGap, SameDomainAccuracyHigh) {
  auto spec = small_spec();
  spec.aspect_offsets = {{0, 0}};
  spec.a.aspect_weights = spec.b.aspect_weights = {1.0};
  spec.aspect_spread = 0.5;
  const auto p = generate_pair(spec, false);
  const auto g = proxy_gap(p.a.train, p.b.train, p.a.test, p.b.test);
  EXPECT_GT(g.accuracy[0][0], 0.95);
  EXPECT_GT(g.accuracy[1][1], 0.95);
}

TEST(ProxyGap, SameTrainingSetHasNoGap) {
  const auto p = generate_pair(small_spec(), false);
  const auto g = proxy_gap(p.a.train, p.a.train, p.a.test, p.b.test);
  EXPECT_EQ(g.gap_a(), 0.0);
  EXPECT_EQ(g.gap_b(), 0.0);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      EXPECT_GE(g.accuracy[i][j], 0.0);
      EXPECT_LE(g.accuracy[i][j], 1.0);
    }
  }
}

TEST(ProxyGap, DisjointMixturesOpenAGap) {
  auto spec = small_spec();
  spec.a.aspect_weights = {0.0, 1.0, 0.0};
  spec.b.aspect_weights = {0.0, 0.0, 1.0};
  const auto p = generate_pair(spec, false);
  const auto g = proxy_gap(p.a.train, p.b.train, p.a.test, p.b.test);
  EXPECT_GT(g.gap_a(), 0.1);
  EXPECT_GT(g.gap_b(), 0.1);
}

TEST(ProxyGap, MissingClassIsSkipped) {
  const auto p = generate_pair(small_spec(), false);
  std::vector<std::string> keep;
  for (const auto& s : p.b.train.samples()) {
    if (s.class_label != "gamma") keep.push_back(s.sample_id);
  }
  const auto g = proxy_gap(p.a.train, p.b.train.subset(keep), p.a.test, p.b.test);
  EXPECT_EQ(g.skipped_classes, std::vector<std::string>{"gamma"});
}

TEST(Synthbench, WrittenFilesFeedThePipeline) {
  const auto dir = fresh_dir("files");
  const auto spec = small_spec();
  const auto p = generate_pair(spec, true);
  const auto files = write_pair(p, spec, dir / "data", dir / "run");
  const auto cfg = load_config(files.config);
  EXPECT_EQ(cfg.stages.size(), 4u);
  EXPECT_EQ(cfg.blur_kind, BlurKind::gaussian);
  const auto a = load_pipeline_dataset(cfg.a);
  ASSERT_EQ(a.size(), p.a.train.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples()[i].sample_id, p.a.train.samples()[i].sample_id);
    EXPECT_EQ(a.samples()[i].group_id, p.a.train.samples()[i].group_id);
    EXPECT_EQ(a.samples()[i].feature, p.a.train.samples()[i].feature);
  }
  const auto t = attach_features(load_dataset(files.test_b), files.dir);
  EXPECT_EQ(t.size(), p.b.test.size());
  EXPECT_TRUE(fs::exists(*cfg.a.images / (a.samples()[0].image_id + ".png")));
}

TEST(Synthbench, DefaultSpecShrinksGapOnBothDomains) {
  const auto dir = fresh_dir("default");
  const SynthSpec spec;
  const auto r = run_synthbench(spec, dir);
  EXPECT_TRUE(r.sizes_monotone);
  EXPECT_TRUE(r.sizes_equal);
  EXPECT_GT(r.before.gap_a(), 0.0);
  EXPECT_GT(r.before.gap_b(), 0.0);
  EXPECT_LE(std::fabs(r.after.gap_a()), std::fabs(r.before.gap_a()));
  EXPECT_LE(std::fabs(r.after.gap_b()), std::fabs(r.before.gap_b()));
  EXPECT_GE(r.reduction_a, 0.3);
  EXPECT_GE(r.reduction_b, 0.3);
  EXPECT_TRUE(r.passed());
  ASSERT_EQ(r.sizes.size(), 5u);
  EXPECT_EQ(r.sizes.back().stage, "aspects");

  const auto dir2 = fresh_dir("default2");
  run_synthbench(spec, dir2);
  EXPECT_EQ(slurp(dir / "synthbench.json"), slurp(dir2 / "synthbench.json"));
  EXPECT_EQ(slurp(dir / "pipeline" / "aspects" / "stills.manifest.jsonl"),
            slurp(dir2 / "pipeline" / "aspects" / "stills.manifest.jsonl"));
}
