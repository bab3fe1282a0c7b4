#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "roadgraph/geometry.hpp"

namespace roadgraph {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultIndexCell = 16.0;

struct Node {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  int degree = 0;

  Point point() const { return {x, y}; }
  friend bool operator==(const Node&, const Node&) = default;
};

/// Vertex as supplied to build_graph; ids are arbitrary but unique.
struct RawVertex {
  std::int64_t id = 0;
  double x = 0.0;
  double y = 0.0;
};

using RawEdge = std::pair<std::int64_t, std::int64_t>;

/// Undirected edge with u < v.
struct Edge {
  int u = 0;
  int v = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class GraphError : public std::invalid_argument {
 public:
  enum class Kind { DuplicateId, NonFiniteCoordinate, OutOfExtent, UnknownVertex, SelfLoop, BadExtent };

  GraphError(Kind kind, std::size_t index, const std::string& what)
      : std::invalid_argument(what), kind_(kind), index_(index) {}

  Kind kind() const { return kind_; }
  /// Position of the offending element in the vertex or edge input list.
  std::size_t index() const { return index_; }

 private:
  Kind kind_;
  std::size_t index_;
};

/// Uniform grid buckets over a point set.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  SpatialIndex(std::span<const Point> points, double cell_size = kDefaultIndexCell);

  /// Ids of points with Euclidean distance <= radius, in unspecified order.
  std::vector<int> query(Point center, double radius) const;

  double cell_size() const { return cell_; }

 private:
  std::int64_t key(std::int64_t cx, std::int64_t cy) const { return cx * stride_ + cy; }

  double cell_ = kDefaultIndexCell;
  std::int64_t stride_ = 1;
  std::int64_t min_cx_ = 0, min_cy_ = 0, max_cx_ = -1, max_cy_ = -1;
  std::vector<Point> points_;
  // CSR layout over cells: cell_start_[k]..cell_start_[k+1] into cell_items_.
  std::vector<int> cell_start_;
  std::vector<int> cell_items_;
};

/// Undirected planar road graph in pixel coordinates. Immutable once built.
class RoadGraph {
 public:
  struct Incidence {
    int neighbor;
    int edge;
  };

  RoadGraph() = default;

  Extent extent() const { return extent_; }
  int width() const { return extent_.width; }
  int height() const { return extent_.height; }

  std::size_t vertex_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  std::span<const Node> nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  Point point(int id) const { return nodes_[static_cast<std::size_t>(id)].point(); }
  std::span<const Edge> edges() const { return edges_; }
  double edge_length(int e) const { return lengths_[static_cast<std::size_t>(e)]; }
  double total_length() const;

  std::span<const Incidence> incident(int id) const {
    const auto b = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(id)]);
    const auto e = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(id) + 1]);
    return std::span<const Incidence>(incidence_).subspan(b, e - b);
  }

  const SpatialIndex& index() const { return index_; }

  /// Same extent, vertices and edge list; everything else derives from these.
  friend bool operator==(const RoadGraph& a, const RoadGraph& b) {
    return a.extent_ == b.extent_ && a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

  friend RoadGraph build_graph(std::span<const RawVertex>, std::span<const RawEdge>, Extent,
                               double);

 private:
  Extent extent_;
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<double> lengths_;
  std::vector<int> offsets_{0};
  std::vector<Incidence> incidence_;
  SpatialIndex index_;
};

/// Validates and builds a graph. Vertex ids are re-densified in input order;
/// duplicate edges (in either orientation) collapse. Throws GraphError.
RoadGraph build_graph(std::span<const RawVertex> vertices, std::span<const RawEdge> edges,
                      Extent extent, double index_cell = kDefaultIndexCell);

/// Convenience overload: vertex i gets raw id i.
RoadGraph build_graph(std::span<const Point> points, std::span<const Edge> edges, Extent extent);

/// Nodes within `radius` of center, sorted by (distance, id).
std::vector<Node> nodes_within(const RoadGraph& graph, Point center, double radius,
                               std::optional<int> exclude = std::nullopt);

/// Single-source distances along edges (Euclidean edge weights). Vertices
/// farther than `bound` are reported as kUnreachable.
std::vector<double> shortest_path_lengths(const RoadGraph& graph, int source,
                                          double bound = kUnreachable);

/// Exact shortest path length or nullopt when b is unreachable from a.
std::optional<double> shortest_path_length(const RoadGraph& graph, int a, int b);

/// Connected-component label per vertex, labels dense from 0 in vertex order.
std::vector<int> connected_components(const RoadGraph& graph);

/// A simplified edge: a maximal chain of the source graph between retained
/// vertices, carrying its full polyline.
struct PolylineEdge {
  int u = 0;  // retained-vertex index
  int v = 0;  // retained-vertex index (== u for an isolated cycle)
  double length = 0.0;
  std::vector<int> chain;  // source-graph vertex ids from u to v inclusive
};

/// Graph with degree-2 chains collapsed. Retained vertices are every vertex
/// whose degree is not 2, plus one anchor per isolated cycle.
class SimplifiedGraph {
 public:
  std::span<const int> retained() const { return retained_; }
  Point point(int k) const { return points_[static_cast<std::size_t>(k)]; }
  std::span<const PolylineEdge> edges() const { return edges_; }
  std::size_t vertex_count() const { return retained_.size(); }
  Extent extent() const { return extent_; }
  double total_length() const;
  /// Geometry of edge e as points from u to v.
  std::vector<Point> polyline(int e) const;

  std::optional<double> shortest_path_length(int a, int b) const;

  friend SimplifiedGraph simplify_graph(const RoadGraph&);

 private:
  Extent extent_;
  std::vector<int> retained_;    // source-graph vertex id per retained vertex
  std::vector<Point> points_;    // coordinates per retained vertex
  std::vector<Point> source_points_;
  std::vector<PolylineEdge> edges_;
  std::vector<std::vector<std::pair<int, int>>> adjacency_;  // (neighbor, edge)
};

SimplifiedGraph simplify_graph(const RoadGraph& graph);

}  // namespace roadgraph
