#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "roadgraph/graph.hpp"

namespace roadgraph {

struct TopoConfig {
  double seed_interval = 50.0;
  double propagation = 300.0;
  double marker_spacing = 5.0;
  double match_radius = 8.0;

  void validate() const;
};

struct AplsConfig {
  double snap_radius = 8.0;
  int max_pairs = 500;
  double injection_interval = 50.0;

  void validate() const;
};

struct TopoResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t seeds = 0;
  std::size_t matched_seeds = 0;
  std::size_t marbles = 0;
  std::size_t holes = 0;
  std::size_t matched = 0;  // one-to-one marble/hole matches
};

struct AplsResult {
  double apls = 0.0;
  double gt_to_proposal = 0.0;
  double proposal_to_gt = 0.0;
  std::size_t gt_pairs = 0;
  std::size_t proposal_pairs = 0;
};

struct MetricsReport {
  TopoResult topo;
  AplsResult apls;
};

/// A point on a graph edge, `offset` measured along the edge from its u end.
struct GraphLocation {
  int edge = 0;
  double offset = 0.0;
  Point point;
};

/// Nearest point on any edge within `radius`; ties go to the lowest edge index.
std::optional<GraphLocation> nearest_location(const RoadGraph& graph, Point p, double radius);

/// Points on the graph whose geodesic distance from `start` is a multiple of
/// `spacing` and at most `max_distance`. Geometry-intrinsic: independent of
/// vertex ids and edge order.
std::vector<Point> geodesic_markers(const RoadGraph& graph, const GraphLocation& start,
                                    double max_distance, double spacing);

/// TOPO: hole/marble comparison of subgraphs reachable from seeds placed along
/// the ground truth. Throws std::invalid_argument if the ground truth has no edges.
TopoResult topo(const RoadGraph& gt, const RoadGraph& proposal, const TopoConfig& cfg = {});

/// Mean of both directional path-length similarity scores. Throws
/// std::invalid_argument if neither graph has edges; 0 if exactly one is empty.
AplsResult apls(const RoadGraph& gt, const RoadGraph& proposal, const AplsConfig& cfg = {},
                std::uint64_t seed = 0);

MetricsReport evaluate(const RoadGraph& gt, const RoadGraph& proposal, const TopoConfig& topo_cfg,
                       const AplsConfig& apls_cfg, std::uint64_t seed = 0);

}  // namespace roadgraph
