#include "roadgraph/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"
#include "roadgraph/rng.hpp"

namespace roadgraph {

using json = nlohmann::json;

TrainingConfig with_flags(TrainingConfig training, bool resample, bool extended_line) {
  training.resample = resample;
  training.layout.line = extended_line ? LineMode::Extended : LineMode::SegmentOnly;
  return training;
}

std::vector<RoadGraph> extract_all(std::span<const Scene> scenes, const Classifier& classifier,
                                   const FeatureLayout& layout, const InferenceConfig& cfg) {
  std::vector<RoadGraph> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) out.push_back(run_inference(s, classifier, layout, cfg).graph);
  return out;
}

EvalReport evaluate_all(std::span<const Scene> scenes, std::span<const RoadGraph> predictions,
                        const TopoConfig& topo_cfg, const AplsConfig& apls_cfg, std::uint64_t seed) {
  if (scenes.size() != predictions.size())
    throw std::invalid_argument("evaluation needs one prediction per scene");
  std::vector<SceneMetrics> rows;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (!scenes[i].gt) throw std::invalid_argument("scene '" + scenes[i].name + "' has no ground truth");
    rows.push_back({scenes[i].name, evaluate(*scenes[i].gt, predictions[i], topo_cfg, apls_cfg, seed)});
  }
  return make_report(std::move(rows));
}

std::array<AblationCell, 4> ablation_cells() {
  return {AblationCell{"baseline", false, false}, AblationCell{"resample", true, false},
          AblationCell{"extended-line", false, true}, AblationCell{"full", true, true}};
}

MeanSd mean_sd(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_sd of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanSd r;
  r.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

AblationSummary run_ablation(std::span<const Scene> train, std::span<const Scene> val,
                             std::span<const Scene> test, const RunConfig& cfg,
                             std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  AblationSummary summary;
  summary.seeds.assign(seeds.begin(), seeds.end());
  const auto cells = ablation_cells();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    AblationCellResult& out = summary.cells[c];
    out.cell = cells[c];
    const TrainingConfig tc = with_flags(cfg.training, cells[c].resample, cells[c].extended_line);
    for (std::uint64_t seed : seeds) {
      const TrainingResult trained = run_training(train, tc, seed);
      AblationRun run;
      run.seed = seed;
      run.thresholds = search_thresholds(val, trained.classifier, tc.layout, cfg.inference, cfg.topo,
                                         cfg.threshold_grid);
      InferenceConfig ic = cfg.inference;
      ic.thresholds = run.thresholds.best;
      const auto graphs = extract_all(test, trained.classifier, tc.layout, ic);
      run.report = evaluate_all(test, graphs, cfg.topo, cfg.apls, seed);
      out.runs.push_back(std::move(run));
    }
    auto collect = [&](auto get) {
      std::vector<double> v;
      for (const auto& r : out.runs) v.push_back(100.0 * get(r.report.mean));
      return mean_sd(v);
    };
    out.f1 = collect([](const MetricsReport& m) { return m.topo.f1; });
    out.precision = collect([](const MetricsReport& m) { return m.topo.precision; });
    out.recall = collect([](const MetricsReport& m) { return m.topo.recall; });
    out.apls = collect([](const MetricsReport& m) { return m.apls.apls; });
  }
  return summary;
}

std::string format_ablation(const AblationSummary& summary) {
  json cells = json::array();
  for (const auto& c : summary.cells) {
    json runs = json::array();
    for (const auto& r : c.runs)
      runs.push_back({{"seed", r.seed},
                      {"t1", r.thresholds.best.t1},
                      {"t2", r.thresholds.best.t2},
                      {"t3", r.thresholds.best.t3},
                      {"val_f1", 100.0 * r.thresholds.f1},
                      {"f1", 100.0 * r.report.mean.topo.f1},
                      {"precision", 100.0 * r.report.mean.topo.precision},
                      {"recall", 100.0 * r.report.mean.topo.recall},
                      {"apls", 100.0 * r.report.mean.apls.apls}});
    auto ms = [](const MeanSd& m) { return json{{"mean", m.mean}, {"sd", m.sd}}; };
    cells.push_back({{"name", c.cell.name},
                     {"resample", c.cell.resample},
                     {"extended_line", c.cell.extended_line},
                     {"f1", ms(c.f1)},
                     {"precision", ms(c.precision)},
                     {"recall", ms(c.recall)},
                     {"apls", ms(c.apls)},
                     {"runs", std::move(runs)}});
  }
  json j;
  j["format"] = "roadgraph-ablation";
  j["version"] = 1;
  j["seeds"] = summary.seeds;
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string ablation_table(const AblationSummary& summary) {
  std::string out = "cell            resample  ext-line  F1              Precision       Recall          APLS\n";
  char buf[256];
  for (const auto& c : summary.cells) {
    std::snprintf(buf, sizeof buf, "%-15s %-9s %-9s %6.2f +- %5.2f  %6.2f +- %5.2f  %6.2f +- %5.2f  %6.2f +- %5.2f\n",
                  c.cell.name.c_str(), c.cell.resample ? "yes" : "no", c.cell.extended_line ? "yes" : "no",
                  c.f1.mean, c.f1.sd, c.precision.mean, c.precision.sd, c.recall.mean, c.recall.sd,
                  c.apls.mean, c.apls.sd);
    out += buf;
  }
  return out;
}

}  // namespace roadgraph
