#pragma once

#include <optional>
#include <span>
#include <vector>

#include "roadgraph/graph.hpp"
#include "roadgraph/raster.hpp"
#include "roadgraph/rng.hpp"

namespace roadgraph {

struct SamplerConfig {
  int sources = 512;             // N, per patch
  double gather_radius = 16.0;   // R
  double resample_radius = 8.0;  // r
  double positive_budget = 16.0; // max GT path length for a positive label

  void validate() const;
};

enum class Provenance { GroundTruthTarget, ResampledTarget, InferenceCandidate };

struct NodePairSample {
  Point source;
  Point target;
  std::optional<bool> label;  // unset for inference candidates
  Provenance provenance = Provenance::GroundTruthTarget;
};

struct LabeledTarget {
  Node node;
  bool positive = false;
};

/// Draws min(N, |candidates|) distinct source nodes without replacement,
/// each weighted by 1 / (number of candidates sharing its degree).
std::vector<Node> sample_sources(const RoadGraph& gt, std::span<const int> candidates,
                                 const SamplerConfig& cfg, Rng& rng);
std::vector<Node> sample_sources(const RoadGraph& gt, const SamplerConfig& cfg, Rng& rng);

/// GT nodes within R of the source (closed ball, source excluded), sorted by
/// distance. Positive iff reachable along GT edges within the path budget.
std::vector<LabeledTarget> gather_targets(const RoadGraph& gt, const Node& source,
                                          const SamplerConfig& cfg);

/// Pixel of maximum mask value in the closed disk of `radius` around p; ties
/// go to the lowest (row, col). Returns p unchanged if the disk holds no pixel.
Point disk_argmax(const ProbabilityMask& mask, Point p, double radius);

/// Node-guided resampling: each target moves to the disk argmax of the road
/// mask within r; sources and labels are untouched.
std::vector<NodePairSample> resample_targets(std::span<const NodePairSample> pairs,
                                             const ProbabilityMask& road_mask,
                                             const SamplerConfig& cfg);

}  // namespace roadgraph
