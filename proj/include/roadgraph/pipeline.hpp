#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "roadgraph/connectivity.hpp"
#include "roadgraph/graph.hpp"
#include "roadgraph/metrics.hpp"
#include "roadgraph/raster.hpp"
#include "roadgraph/sampling.hpp"

namespace roadgraph {

struct PatchWindow {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;

  bool contains(Point p) const {
    return p.x >= col && p.x < col + width && p.y >= row && p.y < row + height;
  }
};

/// Square windows of `patch_size` covering a height x width scene. The last
/// window on each axis is shifted back to end flush with the scene; windows
/// are clipped when the scene is smaller than one patch.
struct PatchPlan {
  int patch_size = 512;
  int stride = 384;
  int height = 0;
  int width = 0;
  std::vector<PatchWindow> windows;
};

/// stride 0 selects 3/4 of the patch size.
PatchPlan plan_patches(int height, int width, int patch_size, int stride = 0);

/// Full-scene rasters after per-patch blending.
struct InferenceBundle {
  ProbabilityMask road;
  ProbabilityMask keypoint;
  FeatureMap features;

  /// Throws std::invalid_argument if the spatial dimensions disagree.
  void validate() const;
};

/// A scene as the pipeline sees it. `gt` is required for training and
/// evaluation only.
struct Scene {
  std::string name;
  std::optional<RoadGraph> gt;
  ProbabilityMask road;
  ProbabilityMask keypoint;
  FeatureMap features;
};

/// Cuts each raster into the plan's windows and mean-blends them back. With a
/// surrogate backbone the per-patch predictions are crops of the scene rasters.
InferenceBundle blend_bundle(const Scene& scene, const PatchPlan& plan);

struct TrainingConfig {
  int patch_size = 512;
  int patch_stride = 0;
  SamplerConfig sampler;
  FeatureLayout layout;
  std::vector<int> hidden{64, 64};
  double learning_rate = 1e-3;
  int epochs = 20;
  int batch_size = 64;
  bool resample = true;

  void validate() const;
  std::vector<int> layer_sizes() const;
};

struct TrainingResult {
  Classifier classifier;
  TrainState state;
  std::vector<double> epoch_losses;
  std::size_t samples_last_epoch = 0;
  std::size_t positives_last_epoch = 0;
};

/// Pairs built for one training patch, before feature assembly.
std::vector<NodePairSample> training_pairs(const RoadGraph& gt, const ProbabilityMask& road,
                                           const PatchWindow& window, const TrainingConfig& cfg,
                                           Rng& rng);

/// Trains from scratch, or continues `resume` for cfg.epochs more epochs.
/// Deterministic in (scenes, cfg, seed).
TrainingResult run_training(std::span<const Scene> scenes, const TrainingConfig& cfg,
                            std::uint64_t seed, const TrainingResult* resume = nullptr);

enum class NodeOrigin { RoadMask, KeypointMask };

struct ExtractedNode {
  Point point;
  float score = 0.0f;
  NodeOrigin origin = NodeOrigin::RoadMask;

  friend bool operator==(const ExtractedNode&, const ExtractedNode&) = default;
};

struct InferenceConfig {
  int patch_size = 512;
  int patch_stride = 0;
  double r1 = 16.0;              // road-mask NMS radius
  double r2 = 8.0;               // keypoint-mask NMS radius
  double merge_distance = 16.0;  // road peaks closer than this to a keypoint peak are dropped
  double pair_radius = 34.0;     // keypoint spacing bound (32) plus pixel rounding
  bool drop_isolated = true;
  ThresholdSet thresholds;

  void validate() const;
};

/// Keypoint peaks (t2, r2) followed by road peaks (t1, r1) that lie at least
/// merge_distance from every keypoint peak.
std::vector<ExtractedNode> extract_nodes(const InferenceBundle& bundle, const ThresholdSet& thresholds,
                                         const InferenceConfig& cfg);

struct EdgeCandidate {
  int a = 0;  // a < b, indices into the node list
  int b = 0;
  std::vector<double> scores;
  double fused = 0.0;
};

/// Scores every unordered node pair within `pair_radius` in both directions
/// and fuses the scores by their mean. Sorted by fused score descending, then
/// by (a, b).
std::vector<EdgeCandidate> score_pairs(std::span<const ExtractedNode> nodes,
                                       const InferenceBundle& bundle, const Classifier& classifier,
                                       const FeatureLayout& layout, double pair_radius);

/// Graph over candidates with fused >= t3.
RoadGraph emit_graph(std::span<const ExtractedNode> nodes, std::span<const EdgeCandidate> candidates,
                     double t3, Extent extent, bool drop_isolated = true);

struct InferenceDiagnostics {
  double blend_ms = 0.0;
  double extract_ms = 0.0;
  double score_ms = 0.0;
  double emit_ms = 0.0;
  std::size_t patches = 0;
  std::size_t keypoint_nodes = 0;
  std::size_t road_nodes = 0;
  std::size_t candidates = 0;
  std::size_t emitted_edges = 0;
};

struct InferenceResult {
  RoadGraph graph;
  InferenceDiagnostics diagnostics;
};

InferenceResult run_inference(const Scene& scene, const Classifier& classifier,
                              const FeatureLayout& layout, const InferenceConfig& cfg);

struct ThresholdSearch {
  ThresholdSet best;
  double f1 = 0.0;
  std::size_t evaluated = 0;  // distinct edge sets scored
};

/// Default grid: 0.05 to 0.95 in steps of 0.05.
std::vector<double> default_threshold_grid();

/// Exhaustive grid over (t1, t2, t3) maximizing mean TOPO F1 on `val`. Ties go
/// to the lexicographically smallest triple. Throws on an empty validation set.
ThresholdSearch search_thresholds(std::span<const Scene> val, const Classifier& classifier,
                                  const FeatureLayout& layout, const InferenceConfig& cfg,
                                  const TopoConfig& topo_cfg, std::span<const double> grid);

}  // namespace roadgraph
