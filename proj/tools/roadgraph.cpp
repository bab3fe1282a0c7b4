#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "roadgraph/config.hpp"
#include "roadgraph/experiment.hpp"
#include "roadgraph/io.hpp"
#include "roadgraph/threading.hpp"

using namespace roadgraph;
using json = nlohmann::json;

namespace {

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    RunConfig cfg;
    cfg.validate();
    return cfg;
  }
  return load_config(path);
}

Split split_option(const std::string& name) {
  try {
    return parse_split(name);
  } catch (const std::invalid_argument&) {
    throw CLI::ValidationError("--split", "unknown split '" + name + "'");
  }
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string strip(const std::string& s, const std::string& suffix) {
  return ends_with(s, suffix) ? s.substr(0, s.size() - suffix.size()) : s;
}

/// Graph files named by scene: "<name>.graph" or "<name>.gt.graph".
std::map<std::string, fs::path> graph_files(const std::vector<std::string>& inputs, bool gt) {
  std::map<std::string, fs::path> out;
  auto add = [&](const fs::path& p) {
    const std::string file = p.filename().string();
    const std::string name = gt ? strip(strip(file, ".graph"), ".gt") : strip(file, ".graph");
    if (!out.emplace(name, p).second) throw std::invalid_argument("scene '" + name + "' is listed twice");
  };
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p)) {
        const std::string f = e.path().filename().string();
        if (!e.is_regular_file() || !ends_with(f, ".graph")) continue;
        if (ends_with(f, ".gt.graph") != gt) continue;
        files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) add(f);
    } else {
      if (!fs::exists(p)) throw IoError("no such file '" + in + "'");
      add(p);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const Manifest manifest = make_benchmark(cfg.counts, cfg.benchmark, a.seed);
  const fs::path path = write_benchmark(a.out, manifest);
  std::cout << path.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, config, out, resume, log;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool no_resample = false;
  bool no_extended_line = false;
};

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const TrainingConfig tc = with_flags(cfg.training, !a.no_resample, !a.no_extended_line);
  const ManifestFile manifest = load_manifest(a.manifest);
  const std::vector<Scene> scenes = load_split(manifest, Split::Train);

  std::optional<TrainingResult> resume;
  std::uint64_t seed = a.seed;
  if (!a.resume.empty()) {
    Checkpoint ck = load_checkpoint(a.resume);
    require_compatible(ck, tc);
    if (!a.seed_given) seed = ck.seed;
    resume = TrainingResult{std::move(ck.classifier), std::move(ck.state), std::move(ck.epoch_losses), 0, 0};
  }
  const auto start = std::chrono::steady_clock::now();
  TrainingResult result = run_training(scenes, tc, seed, resume ? &*resume : nullptr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::size_t first = result.epoch_losses.size() - static_cast<std::size_t>(tc.epochs);
  for (std::size_t e = first; e < result.epoch_losses.size(); ++e)
    std::cerr << "epoch " << e + 1 << " loss " << fixed(result.epoch_losses[e], 6) << "\n";
  std::cerr << "trained " << tc.epochs << " epochs on " << scenes.size() << " scenes in " << fixed(secs, 1)
            << " s (" << result.samples_last_epoch << " pairs per epoch, " << result.positives_last_epoch
            << " positive)\n";

  Checkpoint ck{tc, std::move(result.classifier), std::move(result.state), result.epoch_losses, seed};
  save_checkpoint(a.out, ck);

  json log;
  log["format"] = "roadgraph-training-log";
  log["version"] = 1;
  log["checkpoint"] = fs::path(a.out).filename().string();
  log["config_hash"] = hash_hex(ck.config_hash());
  log["seed"] = seed;
  log["resample"] = tc.resample;
  log["line_mode"] = to_string(tc.layout.line);
  log["scenes"] = scenes.size();
  log["samples_last_epoch"] = result.samples_last_epoch;
  log["positives_last_epoch"] = result.positives_last_epoch;
  log["epoch_losses"] = result.epoch_losses;
  const std::string log_path = a.log.empty() ? a.out + ".log.json" : a.log;
  write_file_atomic(log_path, log.dump(2) + "\n");
  std::cout << a.out << "\n";
  return 0;
}

struct ExtractArgs {
  std::string checkpoint, config, out, manifest, split = "test-in", search;
  std::vector<std::string> scenes;
  std::optional<double> t1, t2, t3;
};

int cmd_extract(const ExtractArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const FeatureLayout& layout = ck.training.layout;
  InferenceConfig ic = cfg.inference;
  if (ck.training.patch_size != ic.patch_size || ck.training.patch_stride != ic.patch_stride)
    throw ConfigError("checkpoint was trained with patch " + std::to_string(ck.training.patch_size) + "/" +
                      std::to_string(ck.training.patch_stride) + " but the config asks for " +
                      std::to_string(ic.patch_size) + "/" + std::to_string(ic.patch_stride));

  std::vector<fs::path> paths;
  for (const auto& s : a.scenes) paths.emplace_back(s);
  if (!a.manifest.empty())
    for (auto& p : load_manifest(a.manifest).split_paths(split_option(a.split))) paths.push_back(p);
  if (paths.empty()) throw std::invalid_argument("no scenes to extract (pass scene files or --manifest)");

  std::vector<std::string> header;
  if (!a.search.empty()) {
    if (a.t1 || a.t2 || a.t3) throw CLI::ValidationError("--search-thresholds", "excludes --t1/--t2/--t3");
    const std::vector<Scene> val = load_split(load_manifest(a.search), Split::Val);
    for (const Scene& s : val)
      if (s.features.channels() != layout.channels)
        throw std::invalid_argument("scene '" + s.name + "' has " + std::to_string(s.features.channels()) +
                                    " feature channels, checkpoint expects " + std::to_string(layout.channels));
    const ThresholdSearch ts = search_thresholds(val, ck.classifier, layout, ic, cfg.topo, cfg.threshold_grid);
    ic.thresholds = ts.best;
    std::cerr << "threshold search: t1 " << ts.best.t1 << " t2 " << ts.best.t2 << " t3 " << ts.best.t3
              << " val F1 " << fixed(ts.f1) << " (" << ts.evaluated << " edge sets)\n";
    header.push_back("threshold-search val-scenes=" + std::to_string(val.size()) + " val-f1=" + fixed(ts.f1, 6));
  } else {
    if (a.t1) ic.thresholds.t1 = *a.t1;
    if (a.t2) ic.thresholds.t2 = *a.t2;
    if (a.t3) ic.thresholds.t3 = *a.t3;
  }
  ic.validate();
  header.insert(header.begin(), "thresholds t1=" + fixed(ic.thresholds.t1, 6) + " t2=" +
                                    fixed(ic.thresholds.t2, 6) + " t3=" + fixed(ic.thresholds.t3, 6));
  header.push_back("checkpoint config-hash=" + hash_hex(ck.config_hash()));

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw IoError("cannot create output directory '" + a.out + "'");
  for (const auto& path : paths) {
    const Scene scene = load_scene(path);
    if (scene.features.channels() != layout.channels)
      throw std::invalid_argument("scene '" + scene.name + "' has " + std::to_string(scene.features.channels()) +
                                  " feature channels, checkpoint expects " + std::to_string(layout.channels));
    const InferenceResult r = run_inference(scene, ck.classifier, layout, ic);
    const auto& d = r.diagnostics;
    std::cerr << scene.name << ": " << d.patches << " patches, " << d.keypoint_nodes << " keypoint + "
              << d.road_nodes << " road nodes, " << d.candidates << " candidates, " << d.emitted_edges
              << " edges; blend " << fixed(d.blend_ms, 1) << " ms, nodes " << fixed(d.extract_ms, 1)
              << " ms, scoring " << fixed(d.score_ms, 1) << " ms, emit " << fixed(d.emit_ms, 1) << " ms\n";
    const fs::path out = fs::path(a.out) / (scene.name + ".graph");
    save_graph(out, r.graph, header);
    std::cout << out.string() << "\n";
  }
  return 0;
}

struct EvalArgs {
  std::vector<std::string> pred, gt;
  std::string manifest, split = "test-in", config, out;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const auto preds = graph_files(a.pred, false);
  std::map<std::string, fs::path> gts;
  if (!a.manifest.empty()) {
    if (!a.gt.empty()) throw CLI::ValidationError("--gt", "excludes --manifest");
    for (const auto& p : load_manifest(a.manifest).split_paths(split_option(a.split))) {
      const SceneRecord rec = load_scene_record(p);
      gts.emplace(rec.name, p.parent_path() / (rec.name + ".gt.graph"));
    }
  } else {
    if (a.gt.empty()) throw CLI::ValidationError("--gt", "pass ground-truth graphs or --manifest");
    gts = graph_files(a.gt, true);
  }
  for (const auto& [name, p] : preds)
    if (!gts.count(name)) throw std::invalid_argument("prediction '" + name + "' has no ground truth");
  for (const auto& [name, p] : gts)
    if (!preds.count(name)) throw std::invalid_argument("ground truth '" + name + "' has no prediction");
  if (preds.empty()) throw std::invalid_argument("no graphs to evaluate");

  std::vector<SceneMetrics> rows;
  for (const auto& [name, p] : preds) {
    const RoadGraph pred = load_graph(p).graph;
    const RoadGraph gt = load_graph(gts.at(name)).graph;
    rows.push_back({name, evaluate(gt, pred, cfg.topo, cfg.apls, a.seed)});
  }
  const EvalReport report = make_report(std::move(rows));
  if (!a.out.empty()) write_file_atomic(a.out, format_report(report));

  char buf[160];
  std::printf("%-24s %8s %10s %8s %8s\n", "scene", "F1", "Precision", "Recall", "APLS");
  for (const auto& s : report.scenes) {
    std::snprintf(buf, sizeof buf, "%-24s %8.4f %10.4f %8.4f %8.4f\n", s.name.c_str(), s.metrics.topo.f1,
                  s.metrics.topo.precision, s.metrics.topo.recall, s.metrics.apls.apls);
    std::cout << buf;
  }
  std::snprintf(buf, sizeof buf, "%-24s %8.4f %10.4f %8.4f %8.4f\n", "mean", report.mean.topo.f1,
                report.mean.topo.precision, report.mean.topo.recall, report.mean.apls.apls);
  std::cout << buf;
  return 0;
}

struct AblateArgs {
  std::string manifest, config, out;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

int cmd_ablate(const AblateArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const ManifestFile manifest = load_manifest(a.manifest);
  const auto train = load_split(manifest, Split::Train);
  const auto val = load_split(manifest, Split::Val);
  const auto test = load_split(manifest, Split::TestIn);
  const auto start = std::chrono::steady_clock::now();
  const AblationSummary summary = run_ablation(train, val, test, cfg, a.seeds);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) throw IoError("cannot create output directory '" + a.out + "'");
  for (const auto& c : summary.cells) {
    const fs::path dir = fs::path(a.out) / c.cell.name;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    for (const auto& r : c.runs)
      write_file_atomic(dir / ("seed_" + std::to_string(r.seed) + ".report.json"), format_report(r.report));
  }
  write_file_atomic(fs::path(a.out) / "summary.json", format_ablation(summary));
  std::cout << ablation_table(summary);
  std::cerr << "ablation over " << a.seeds.size() << " seeds took " << fixed(secs, 1) << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road-graph extraction from road and keypoint masks"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "roadgraph 1.0");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic benchmark");
  s->add_option("-c,--config", synth.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  s->add_option("-o,--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Benchmark seed");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the connectivity classifier");
  t->add_option("-m,--manifest", train.manifest, "Benchmark manifest")->required()->check(CLI::ExistingFile);
  t->add_option("-c,--config", train.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  t->add_option("-o,--out", train.out, "Checkpoint path")->required();
  auto* seed_opt = t->add_option("--seed", train.seed, "Training seed");
  t->add_option("--resume", train.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  t->add_option("--log", train.log, "Training log path (default <out>.log.json)");
  t->add_flag("--no-resample", train.no_resample, "Train on ground-truth target positions");
  t->add_flag("--no-extended-line", train.no_extended_line, "Sample the segment between the nodes only");

  ExtractArgs extract;
  auto* e = app.add_subcommand("extract", "Extract road graphs from scenes");
  e->add_option("scenes", extract.scenes, "Scene files (*.scene.json)");
  e->add_option("-k,--checkpoint", extract.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  e->add_option("-c,--config", extract.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  e->add_option("-o,--out", extract.out, "Output directory for graph files")->required();
  e->add_option("-m,--manifest", extract.manifest, "Take scenes from this manifest")->check(CLI::ExistingFile);
  e->add_option("--split", extract.split, "Manifest split to extract");
  e->add_option("--t1", extract.t1, "Road-mask NMS threshold");
  e->add_option("--t2", extract.t2, "Keypoint-mask NMS threshold");
  e->add_option("--t3", extract.t3, "Edge score threshold");
  e->add_option("--search-thresholds", extract.search, "Pick thresholds on this manifest's val split")
      ->check(CLI::ExistingFile);

  EvalArgs eval;
  auto* v = app.add_subcommand("eval", "Score predicted graphs against ground truth");
  v->add_option("-p,--pred", eval.pred, "Predicted graph files or directories")->required();
  v->add_option("-g,--gt", eval.gt, "Ground-truth graph files or directories");
  v->add_option("-m,--manifest", eval.manifest, "Take ground truth from this manifest")->check(CLI::ExistingFile);
  v->add_option("--split", eval.split, "Manifest split");
  v->add_option("-c,--config", eval.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  v->add_option("-o,--out", eval.out, "Report path (JSON)");
  v->add_option("--seed", eval.seed, "APLS pair sampling seed");

  AblateArgs ablate;
  auto* b = app.add_subcommand("ablate", "Train and evaluate the resample x extended-line grid");
  b->add_option("-m,--manifest", ablate.manifest, "Benchmark manifest")->required()->check(CLI::ExistingFile);
  b->add_option("-c,--config", ablate.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  b->add_option("-o,--out", ablate.out, "Output directory")->required();
  b->add_option("--seeds", ablate.seeds, "Training seeds")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    default_thread_count();
    if (*s) return cmd_synth(synth);
    if (*t) {
      train.seed_given = seed_opt->count() > 0;
      return cmd_train(train);
    }
    if (*e) return cmd_extract(extract);
    if (*v) return cmd_eval(eval);
    if (*b) {
      if (ablate.seeds.empty()) throw std::invalid_argument("--seeds needs at least one seed");
      return cmd_ablate(ablate);
    }
  } catch (const CLI::Error& err) {
    return app.exit(err);
  } catch (const std::exception& ex) {
    std::cerr << "roadgraph: error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
