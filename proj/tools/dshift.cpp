// dshift: measure and equalize the factors separating two object datasets.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dshift/dshift.hpp"

namespace fs = std::filesystem;
using namespace dshift;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void print_warnings(const Warnings& w) {
  for (const auto& line : w) std::cerr << "warning: " << line << '\n';
}

// Writes to --out if given, otherwise stdout.
void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  const fs::path p(out);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text_file(p, text);
}

Dataset load_with_features(const std::string& path) {
  DatasetInput in;
  in.manifest = path;
  return load_pipeline_dataset(in);
}

// ---------------------------------------------------------------- ingest

int run_ingest(const std::vector<std::string>& inputs, const std::string& name, const Globals& g) {
  if (g.out.empty()) throw UsageError("ingest needs --out <dataset.jsonl>");
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".xml") files.push_back(e.path());
      }
    } else {
      files.emplace_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("ingest: no annotation files found");

  std::vector<Sample> samples;
  std::map<std::string, ImageSize> dims;
  Warnings warnings;
  std::size_t rejected = 0;
  for (const auto& f : files) {
    VocAnnotation ann = parse_voc_xml_file(f);
    if (!dims.emplace(ann.image_id, ann.size).second) {
      throw DataError(f.string() + ": image '" + ann.image_id + "' appears in more than one file");
    }
    for (auto& s : ann.samples) samples.push_back(std::move(s));
    for (const auto& w : ann.warnings) warnings.push_back(f.filename().string() + ": " + w);
    for (const auto& r : ann.rejected) {
      warnings.push_back(f.filename().string() + ": object " + std::to_string(r.object_index) + " rejected: " +
                         r.reason);
      ++rejected;
    }
  }
  const std::string ds_name = name.empty() ? fs::path(g.out).stem().string() : name;
  const Dataset d(ds_name, std::move(samples), std::move(dims));
  const fs::path out(g.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_dataset(out, d);
  print_warnings(warnings);
  std::cout << "ingested " << d.size() << " samples from " << files.size() << " files (" << rejected
            << " objects rejected) into " << g.out << '\n';
  return 0;
}

// ---------------------------------------------------------------- measure

struct MeasureArgs {
  std::string factor;
  std::string dataset;
  std::string other;
  std::string images;
  std::string embeddings;
  std::string other_embeddings;
  std::optional<double> threshold;
  std::string candidates;
  std::size_t n = 0;
  std::string kl = "paired";
  std::string format = "csv";
};

std::string render(const FactorReport& r, const std::string& format) {
  if (format == "json") return report_json(r).dump(2) + "\n";
  if (format != "csv") throw UsageError("unknown format '" + format + "' (csv or json)");
  return report_csv(r);
}

FactorReport measure_framing(const Dataset& d) {
  FactorReport r;
  r.stage = "framing";
  r.columns = {{"n", Aggregate::sum},
               {"rel_size", Aggregate::mean},
               {"aspect_ratio", Aggregate::mean},
               {"truncated", Aggregate::mean},
               {"difficult", Aggregate::mean}};
  for (const auto& [key, idx] : d.by_class(true)) {
    std::vector<std::string> ids;
    for (std::size_t i : idx) ids.push_back(d.samples()[i].sample_id);
    const FramingStats st = framing_stats(d.subset(ids));
    r.set(key, "n", double(st.n_samples));
    r.set(key, "rel_size", st.mean_relative_size);
    r.set(key, "aspect_ratio", st.mean_aspect_ratio);
    r.set(key, "truncated", st.frac_truncated);
    r.set(key, "difficult", st.frac_difficult);
  }
  return r;
}

FactorReport measure_counts(const Dataset& d) {
  FactorReport r;
  r.stage = "counts";
  r.columns = {{"n", Aggregate::sum}, {"difficult", Aggregate::sum}};
  for (const auto& [key, idx] : d.by_class(true)) {
    std::size_t diff = 0;
    for (std::size_t i : idx) diff += d.samples()[i].difficult ? 1 : 0;
    r.set(key, "n", double(idx.size() - diff));
    r.set(key, "difficult", double(diff));
  }
  return r;
}

FactorReport measure_diversity(const Dataset& d, const std::optional<double>& threshold) {
  FactorReport r;
  r.stage = "diversity";
  r.columns = {{"n", Aggregate::sum}, {"groups", Aggregate::sum}, {"ratio", Aggregate::mean}};
  for (const auto& [key, idx] : d.by_class(false)) {
    const GroupSet gs = class_groups(d, idx, key, threshold);
    r.set(key, "n", double(gs.n_samples()));
    r.set(key, "groups", double(gs.n_groups()));
    r.set(key, "ratio", diversity_ratio(gs));
  }
  return r;
}

FactorReport measure_quality(const Dataset& d, const std::string& images) {
  if (images.empty()) throw UsageError("measure quality needs --images <dir>");
  FactorReport r;
  r.stage = "quality";
  r.columns = {{"n", Aggregate::sum}, {"energy", Aggregate::mean}, {"partial_cell", Aggregate::sum}};
  for (const auto& [key, idx] : d.by_class(false)) {
    std::vector<BoxedImage> items;
    for (std::size_t i : idx) {
      const Sample& s = d.samples()[i];
      items.push_back(make_patch(s.sample_id, read_png(image_path(images, s.image_id)), s.box));
    }
    const EnergyReport e = measure_energy(items);
    r.set(key, "n", double(items.size()));
    r.set(key, "energy", e.mean);
    r.set(key, "partial_cell", double(e.partial_cell_samples.size()));
  }
  return r;
}

FactorReport measure_aspects(const Dataset& a, const Dataset& b, const MeasureArgs& m, Warnings& warnings) {
  PipelineConfig cfg;
  cfg.a.name = a.name();
  cfg.b.name = b.name();
  if (!m.embeddings.empty()) cfg.a.embeddings = m.embeddings;
  if (!m.other_embeddings.empty()) cfg.b.embeddings = m.other_embeddings;
  const KlVariant variant = parse_kl_variant(m.kl);
  FactorReport r;
  r.stage = "aspects";
  r.columns = {{"n_a", Aggregate::sum}, {"n_b", Aggregate::sum}, {"d_kl", Aggregate::mean}};
  auto ca = a.by_class(false);
  auto cb = b.by_class(false);
  for (const auto& [key, ia] : ca) {
    auto it = cb.find(key);
    if (it == cb.end()) continue;
    auto [ea, eb] = class_embeddings(a, ia, b, it->second, key, cfg, warnings);
    r.set(key, "n_a", double(ea.size()));
    r.set(key, "n_b", double(eb.size()));
    if (ea.size() == eb.size()) {
      r.set(key, "d_kl", sym_kl(ea, eb, variant));
    } else {
      r.set(key, "d_kl", std::nullopt);
      warnings.push_back(key + ": set sizes differ, d_KL left undefined (equalize counts first)");
    }
  }
  return r;
}

int measure_location(const Dataset& gt, const MeasureArgs& m, const Globals& g) {
  if (m.candidates.empty()) throw UsageError("measure location needs --candidates <csv>");
  const auto cands = read_candidates(m.candidates, gt.image_dims());
  const std::size_t n = m.n == 0 ? std::min(cands.size(), gt.image_dims().size()) : m.n;
  const auto sampled = multinomial_sample(cands, n, derive_seed(g.seed.value_or(0), "location", "all"));
  const SampledCorLoc c = corloc_of_sampled(sampled, gt);
  std::ostringstream os;
  os << "image_id,frame_index,x_min,y_min,x_max,y_max,objectness,border_contact,quality\n";
  for (const auto& s : sampled) {
    os << csv_escape(s.image_id) << ',' << s.frame_index << ',' << format_number(s.box.x_min) << ','
       << format_number(s.box.y_min) << ',' << format_number(s.box.x_max) << ',' << format_number(s.box.y_max)
       << ',' << format_number(s.objectness) << ',' << format_number(s.border_contact) << ','
       << format_number(box_quality(s.objectness, s.border_contact)) << '\n';
  }
  emit(os.str(), g.out);
  std::cerr << "sampled " << sampled.size() << " of " << cands.size() << " candidates; CorLoc "
            << format_optional(c.corloc) << " over " << c.paired << " boxes";
  if (c.unmatched) std::cerr << " (" << c.unmatched << " on images without ground truth)";
  std::cerr << '\n';
  return 0;
}

int run_measure(const MeasureArgs& m, const Globals& g) {
  if (m.dataset.empty()) throw UsageError("measure needs --dataset <jsonl>");
  const Dataset d = load_with_features(m.dataset);
  FactorReport r;
  Warnings warnings;
  if (m.factor == "framing") {
    r = measure_framing(d);
  } else if (m.factor == "counts") {
    r = measure_counts(d);
  } else if (m.factor == "diversity") {
    r = measure_diversity(d, m.threshold);
  } else if (m.factor == "quality") {
    r = measure_quality(d, m.images);
  } else if (m.factor == "aspects") {
    if (m.other.empty()) throw UsageError("measure aspects needs --other <jsonl>");
    r = measure_aspects(d, load_with_features(m.other), m, warnings);
  } else if (m.factor == "location") {
    return measure_location(d, m, g);
  } else {
    throw UsageError("unknown factor '" + m.factor +
                     "' (framing, counts, diversity, quality, aspects or location)");
  }
  print_warnings(warnings);
  emit(render(r, m.format), g.out);
  return 0;
}

// ---------------------------------------------------------------- equalize

PipelineConfig configured(const Globals& g) {
  if (g.config.empty()) throw UsageError("this command needs --config <pipeline.toml>");
  PipelineConfig cfg = load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.out_dir = g.out;
  return cfg;
}

int run_equalize(const std::string& stage, const Globals& g) {
  PipelineConfig cfg = configured(g);
  if (stage != "all") {
    const PipelineStage last = parse_pipeline_stage(stage);
    std::vector<PipelineStage> keep;
    for (PipelineStage s : cfg.stages) {
      if (static_cast<int>(s) <= static_cast<int>(last)) keep.push_back(s);
    }
    if (keep.empty() || keep.back() != last) keep.push_back(last);
    cfg.stages = keep;
  }
  const PipelineResult res = run_pipeline(cfg);
  print_warnings(res.warnings);
  for (const auto& s : res.stages) {
    std::cout << s.tag << ": " << s.a.source_dataset << ' ' << s.a.size() << ", " << s.b.source_dataset << ' '
              << s.b.size() << '\n';
  }
  std::cout << "outputs in " << cfg.out_dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

int run_eval(const std::string& detections, const std::string& gt_path, const std::string& mode,
             bool corloc_only, const Globals& g) {
  const Dataset gt = load_dataset(gt_path);
  const auto dets = read_detections_file(detections);
  std::set<std::string> classes;
  for (const auto& s : gt.samples()) classes.insert(class_key(s.class_label));

  if (corloc_only) {
    // Top-scoring detection of each (image, class) against that image's boxes of the class.
    std::map<std::pair<std::string, std::string>, const Detection*> top;
    for (const auto& d : dets) {
      auto& t = top[{d.image_id, class_key(d.class_label)}];
      if (t == nullptr || d.score > t->score) t = &d;
    }
    std::map<std::string, std::vector<std::pair<BoundingBox, BoundingBox>>> pairs;
    for (const auto& [key, d] : top) {
      const BoundingBox* best = nullptr;
      double best_iou = -1.0;
      for (const auto& s : gt.samples()) {
        if (s.image_id != key.first || class_key(s.class_label) != key.second) continue;
        const double o = iou(d->box, s.box);
        if (o > best_iou) {
          best_iou = o;
          best = &s.box;
        }
      }
      if (best) pairs[key.second].emplace_back(d->box, *best);
    }
    FactorReport r;
    r.stage = "corloc";
    r.columns = {{"boxes", Aggregate::sum}, {"corloc", Aggregate::mean}};
    for (const auto& cls : classes) {
      const auto it = pairs.find(cls);
      const std::vector<std::pair<BoundingBox, BoundingBox>> none;
      const auto& p = it == pairs.end() ? none : it->second;
      r.set(cls, "boxes", double(p.size()));
      r.set(cls, "corloc", corloc(p));
    }
    emit(report_csv(r), g.out);
    return 0;
  }

  const ApMode ap_mode = parse_ap_mode(mode);
  std::map<std::string, std::optional<double>> per_class;
  FactorReport r;
  r.stage = "ap";
  r.columns = {{"positives", Aggregate::sum}, {"ap", Aggregate::mean}};
  for (const auto& cls : classes) {
    const auto curve = average_precision(dets, gt, cls, ap_mode);
    per_class[cls] = curve ? std::optional<double>(curve->ap) : std::nullopt;
    r.set(cls, "positives", curve ? double(curve->n_positives) : 0.0);
    r.set(cls, "ap", per_class[cls]);
  }
  const MeanAp m = mean_ap(per_class);
  for (const auto& cls : m.skipped) std::cerr << "warning: class '" << cls << "' has no positives; AP undefined\n";
  emit(report_csv(r), g.out);  // aggregate row = mAP
  std::cerr << "mAP (" << ap_mode_name(ap_mode) << "): " << format_optional(m.value) << '\n';
  return 0;
}

// ---------------------------------------------------------------- report

int run_report(const std::string& run_dir, const std::string& format, const Globals& g) {
  const fs::path dir(run_dir);
  std::ifstream in(dir / "summary.json");
  if (!in) throw DataError("no summary.json in " + dir.string());
  nlohmann::json summary;
  try {
    in >> summary;
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "summary.json").string() + ": " + e.what());
  }
  std::ostringstream os;
  if (format == "json") {
    nlohmann::ordered_json all;
    all["summary"] = nlohmann::ordered_json::parse(summary.dump());
    all["reports"] = nlohmann::ordered_json::object();
    for (const auto& s : summary.at("stages")) {
      const std::string tag = s.at("stage");
      std::ifstream rj(dir / tag / "report.json");
      if (!rj) throw DataError("missing report for stage " + tag);
      all["reports"][tag] = nlohmann::ordered_json::parse(rj);
    }
    os << all.dump(2) << '\n';
  } else if (format == "text" || format == "csv") {
    os << "stage," << summary.at("dataset_a").get<std::string>() << ',' << summary.at("dataset_b").get<std::string>()
       << '\n';
    std::vector<StageSizes> sizes;
    for (const auto& s : summary.at("stages")) {
      sizes.push_back({s.at("stage"), s.at("a").at("count"), s.at("b").at("count")});
      os << sizes.back().stage << ',' << sizes.back().a << ',' << sizes.back().b << '\n';
    }
    for (const auto& s : sizes) {
      std::ifstream rc(dir / s.stage / "report.csv");
      if (!rc) throw DataError("missing report for stage " + s.stage);
      os << "\n# " << s.stage << '\n' << rc.rdbuf();
    }
    write_text_file(dir / "sizes.svg", sizes_svg(sizes, summary.at("dataset_a"), summary.at("dataset_b")));
  } else {
    throw UsageError("unknown format '" + format + "' (csv or json)");
  }
  emit(os.str(), g.out);
  return 0;
}

// ---------------------------------------------------------------- synthbench

int run_synth(bool no_images, bool data_only, const Globals& g) {
  SynthSpec spec = g.config.empty() ? SynthSpec{} : load_synth_spec(g.config);
  if (g.seed) spec.seed = *g.seed;
  const fs::path out = g.out.empty() ? fs::path("synthbench") : fs::path(g.out);
  if (data_only) {
    const SynthPair pair = generate_pair(spec, !no_images);
    const SynthFiles f = write_pair(pair, spec, out / "data", out / "pipeline");
    std::cout << "wrote synthetic pair to " << f.dir.string() << "; run: dshift equalize all --config "
              << f.config.string() << '\n';
    return 0;
  }
  const SynthbenchResult r = run_synthbench(spec, out, !no_images);
  print_warnings(r.warnings);
  std::cout << synthbench_json(r).dump(2) << '\n';
  if (!r.passed()) {
    std::cerr << "synthbench: gap reduction below " << format_number(r.required_reduction)
              << " or stage sizes inconsistent\n";
    return static_cast<int>(ExitCode::numeric);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure and equalize dataset factors between two object datasets"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "TOML config (pipeline, or synthbench spec)");
  auto* seed_opt = app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--out", g.out, "output file or directory");

  std::vector<std::string> ingest_inputs;
  std::string ingest_name;
  auto* ingest = app.add_subcommand("ingest", "VOC XML annotations -> dataset JSONL");
  ingest->add_option("inputs", ingest_inputs, "XML files or directories")->required();
  ingest->add_option("--name", ingest_name, "dataset name (default: output file stem)");

  MeasureArgs m;
  auto* measure = app.add_subcommand("measure", "per-class measurement of one factor");
  measure->add_option("factor", m.factor, "framing|counts|diversity|quality|aspects|location")->required();
  measure->add_option("--dataset", m.dataset, "dataset JSONL");
  measure->add_option("--other", m.other, "second dataset JSONL (aspects)");
  measure->add_option("--images", m.images, "image directory (quality)");
  measure->add_option("--embeddings", m.embeddings, "per-class embedding CSV directory for --dataset");
  measure->add_option("--other-embeddings", m.other_embeddings, "same for --other");
  measure->add_option("--threshold", m.threshold, "near-identical distance threshold (diversity)");
  measure->add_option("--candidates", m.candidates, "candidate box CSV (location)");
  measure->add_option("--n", m.n, "boxes to sample (location; default one per image)");
  measure->add_option("--kl", m.kl, "paired|plugin");
  measure->add_option("--format", m.format, "csv|json");

  std::string stage;
  auto* equalize = app.add_subcommand("equalize", "run the pipeline up to a stage");
  equalize->add_option("stage", stage, "counts|unique|blur|aspects|all")->required();

  std::string detections, gt, mode = "elevenPoint";
  bool corloc_only = false;
  auto* eval = app.add_subcommand("eval", "AP / CorLoc of a detection file");
  eval->add_option("--detections", detections, "CSV image_id,class,x_min,y_min,x_max,y_max,score")->required();
  eval->add_option("--gt", gt, "ground-truth dataset JSONL")->required();
  eval->add_option("--mode", mode, "elevenPoint|continuous");
  eval->add_flag("--corloc", corloc_only, "CorLoc of the top detection per image and class instead of AP");

  std::string run_dir, format = "csv";
  auto* report = app.add_subcommand("report", "combine the reports of a pipeline run");
  report->add_option("run_dir", run_dir, "pipeline output directory")->required();
  report->add_option("--format", format, "csv|json");

  bool no_images = false, data_only = false;
  auto* synth = app.add_subcommand("synthbench", "synthetic two-domain check of the pipeline");
  synth->add_flag("--no-images", no_images, "skip textures and the blur stage");
  synth->add_flag("--data-only", data_only, "only write the synthetic pair and its pipeline config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*ingest) return run_ingest(ingest_inputs, ingest_name, g);
    if (*measure) return run_measure(m, g);
    if (*equalize) return run_equalize(stage, g);
    if (*eval) return run_eval(detections, gt, mode, corloc_only, g);
    if (*report) return run_report(run_dir, format, g);
    if (*synth) return run_synth(no_images, data_only, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  return static_cast<int>(ExitCode::usage);
}
