#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roadgraph/config.hpp"
#include "roadgraph/io.hpp"
#include "roadgraph/pipeline.hpp"

namespace roadgraph {

/// Applies the two ablation switches to a training config. Without the
/// extended line the classifier still sees the m samples between the nodes.
TrainingConfig with_flags(TrainingConfig training, bool resample, bool extended_line);

/// Runs inference on every scene; graphs come back in scene order.
std::vector<RoadGraph> extract_all(std::span<const Scene> scenes, const Classifier& classifier,
                                   const FeatureLayout& layout, const InferenceConfig& cfg);

/// Per-scene metrics against each scene's ground truth. `seed` drives APLS
/// pair subsampling.
EvalReport evaluate_all(std::span<const Scene> scenes, std::span<const RoadGraph> predictions,
                        const TopoConfig& topo_cfg, const AplsConfig& apls_cfg, std::uint64_t seed = 0);

struct AblationCell {
  std::string name;
  bool resample = false;
  bool extended_line = false;
};

/// baseline, resample, extended-line, full.
std::array<AblationCell, 4> ablation_cells();

struct AblationRun {
  std::uint64_t seed = 0;
  ThresholdSearch thresholds;
  EvalReport report;  // test-in
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single run
};

MeanSd mean_sd(std::span<const double> values);

struct AblationCellResult {
  AblationCell cell;
  std::vector<AblationRun> runs;
  MeanSd f1, precision, recall, apls;
};

struct AblationSummary {
  std::vector<std::uint64_t> seeds;
  std::array<AblationCellResult, 4> cells;
};

/// Trains each cell for every seed, picks thresholds on `val` and evaluates
/// on `test`. Deterministic in its inputs.
AblationSummary run_ablation(std::span<const Scene> train, std::span<const Scene> val,
                             std::span<const Scene> test, const RunConfig& cfg,
                             std::span<const std::uint64_t> seeds);

/// Machine-readable summary: per cell mean and sd of F1, precision, recall
/// and APLS on the 0-100 scale, plus per-run values.
std::string format_ablation(const AblationSummary& summary);
/// Human-readable table.
std::string ablation_table(const AblationSummary& summary);

}  // namespace roadgraph
