#include "roadgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <set>
#include <unordered_map>

namespace roadgraph {
namespace {

std::int64_t cell_of(double v, double cell) {
  return static_cast<std::int64_t>(std::floor(v / cell));
}

using QueueEntry = std::pair<double, int>;
using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

}  // namespace

// ---------------------------------------------------------------------------
// SpatialIndex

SpatialIndex::SpatialIndex(std::span<const Point> points, double cell_size)
    : cell_(cell_size), points_(points.begin(), points.end()) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("spatial index cell size must be positive");
  if (points_.empty()) return;
  min_cx_ = max_cx_ = cell_of(points_[0].x, cell_);
  min_cy_ = max_cy_ = cell_of(points_[0].y, cell_);
  for (const Point& p : points_) {
    min_cx_ = std::min(min_cx_, cell_of(p.x, cell_));
    max_cx_ = std::max(max_cx_, cell_of(p.x, cell_));
    min_cy_ = std::min(min_cy_, cell_of(p.y, cell_));
    max_cy_ = std::max(max_cy_, cell_of(p.y, cell_));
  }
  stride_ = max_cy_ - min_cy_ + 1;
  const std::int64_t cells = (max_cx_ - min_cx_ + 1) * stride_;
  cell_start_.assign(static_cast<std::size_t>(cells) + 1, 0);
  std::vector<std::int64_t> keys(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    keys[i] = key(cell_of(points_[i].x, cell_) - min_cx_, cell_of(points_[i].y, cell_) - min_cy_);
    ++cell_start_[static_cast<std::size_t>(keys[i]) + 1];
  }
  for (std::size_t k = 1; k < cell_start_.size(); ++k) cell_start_[k] += cell_start_[k - 1];
  cell_items_.resize(points_.size());
  std::vector<int> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i)
    cell_items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(keys[i])]++)] =
        static_cast<int>(i);
}

std::vector<int> SpatialIndex::query(Point center, double radius) const {
  std::vector<int> out;
  if (points_.empty() || radius < 0.0) return out;
  const double r2 = radius * radius;
  const std::int64_t x0 = std::max(min_cx_, cell_of(center.x - radius, cell_));
  const std::int64_t x1 = std::min(max_cx_, cell_of(center.x + radius, cell_));
  const std::int64_t y0 = std::max(min_cy_, cell_of(center.y - radius, cell_));
  const std::int64_t y1 = std::min(max_cy_, cell_of(center.y + radius, cell_));
  for (std::int64_t cx = x0; cx <= x1; ++cx) {
    for (std::int64_t cy = y0; cy <= y1; ++cy) {
      const auto k = static_cast<std::size_t>(key(cx - min_cx_, cy - min_cy_));
      for (int i = cell_start_[k]; i < cell_start_[k + 1]; ++i) {
        const int id = cell_items_[static_cast<std::size_t>(i)];
        if (distance_sq(points_[static_cast<std::size_t>(id)], center) <= r2) out.push_back(id);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// RoadGraph

double RoadGraph::total_length() const {
  double sum = 0.0;
  for (double l : lengths_) sum += l;
  return sum;
}

RoadGraph build_graph(std::span<const RawVertex> vertices, std::span<const RawEdge> edges,
                      Extent extent, double index_cell) {
  using Kind = GraphError::Kind;
  if (extent.width < 0 || extent.height < 0)
    throw GraphError(Kind::BadExtent, 0, "negative graph extent");

  RoadGraph g;
  g.extent_ = extent;
  std::unordered_map<std::int64_t, int> dense;
  dense.reserve(vertices.size());
  g.nodes_.reserve(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const RawVertex& v = vertices[i];
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw GraphError(Kind::NonFiniteCoordinate, i,
                       "vertex " + std::to_string(i) + " has a non-finite coordinate");
    if (v.x < 0.0 || v.y < 0.0 || v.x >= extent.width || v.y >= extent.height)
      throw GraphError(Kind::OutOfExtent, i,
                       "vertex " + std::to_string(i) + " lies outside the graph extent");
    const int id = static_cast<int>(g.nodes_.size());
    if (!dense.emplace(v.id, id).second)
      throw GraphError(Kind::DuplicateId, i,
                       "vertex " + std::to_string(i) + " repeats id " + std::to_string(v.id));
    g.nodes_.push_back(Node{id, v.x, v.y, 0});
  }

  std::set<Edge> unique;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto a = dense.find(edges[i].first);
    const auto b = dense.find(edges[i].second);
    if (a == dense.end() || b == dense.end())
      throw GraphError(Kind::UnknownVertex, i,
                       "edge " + std::to_string(i) + " references an unknown vertex id");
    if (a->second == b->second)
      throw GraphError(Kind::SelfLoop, i, "edge " + std::to_string(i) + " is a self-loop");
    unique.insert(Edge{std::min(a->second, b->second), std::max(a->second, b->second)});
  }
  g.edges_.assign(unique.begin(), unique.end());

  const std::size_t n = g.nodes_.size();
  g.lengths_.reserve(g.edges_.size());
  std::vector<int> degree(n, 0);
  for (const Edge& e : g.edges_) {
    g.lengths_.push_back(distance(g.nodes_[static_cast<std::size_t>(e.u)].point(),
                                  g.nodes_[static_cast<std::size_t>(e.v)].point()));
    ++degree[static_cast<std::size_t>(e.u)];
    ++degree[static_cast<std::size_t>(e.v)];
  }
  g.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes_[i].degree = degree[i];
    g.offsets_[i + 1] = g.offsets_[i] + degree[i];
  }
  g.incidence_.resize(static_cast<std::size_t>(g.offsets_[n]));
  std::vector<int> fill(g.offsets_.begin(), g.offsets_.end() - 1);
  for (std::size_t k = 0; k < g.edges_.size(); ++k) {
    const Edge& e = g.edges_[k];
    g.incidence_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.u)]++)] = {e.v, static_cast<int>(k)};
    g.incidence_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.v)]++)] = {e.u, static_cast<int>(k)};
  }

  std::vector<Point> pts;
  pts.reserve(n);
  for (const Node& node : g.nodes_) pts.push_back(node.point());
  g.index_ = SpatialIndex(pts, index_cell);
  return g;
}

RoadGraph build_graph(std::span<const Point> points, std::span<const Edge> edges, Extent extent) {
  std::vector<RawVertex> raw;
  raw.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    raw.push_back({static_cast<std::int64_t>(i), points[i].x, points[i].y});
  std::vector<RawEdge> raw_edges;
  raw_edges.reserve(edges.size());
  for (const Edge& e : edges) raw_edges.emplace_back(e.u, e.v);
  return build_graph(raw, raw_edges, extent);
}

std::vector<Node> nodes_within(const RoadGraph& graph, Point center, double radius,
                               std::optional<int> exclude) {
  if (radius < 0.0) throw std::invalid_argument("nodes_within: negative radius");
  std::vector<std::pair<double, int>> hits;
  for (int id : graph.index().query(center, radius)) {
    if (exclude && *exclude == id) continue;
    hits.emplace_back(distance(graph.point(id), center), id);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<Node> out;
  out.reserve(hits.size());
  for (const auto& [d, id] : hits) out.push_back(graph.node(id));
  return out;
}

std::vector<double> shortest_path_lengths(const RoadGraph& graph, int source, double bound) {
  if (source < 0 || static_cast<std::size_t>(source) >= graph.vertex_count())
    throw std::out_of_range("shortest_path_lengths: unknown vertex id " + std::to_string(source));
  std::vector<double> dist(graph.vertex_count(), kUnreachable);
  MinQueue queue;
  dist[static_cast<std::size_t>(source)] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& inc : graph.incident(u)) {
      const double nd = d + graph.edge_length(inc.edge);
      if (nd > bound) continue;
      if (nd < dist[static_cast<std::size_t>(inc.neighbor)]) {
        dist[static_cast<std::size_t>(inc.neighbor)] = nd;
        queue.emplace(nd, inc.neighbor);
      }
    }
  }
  return dist;
}

std::optional<double> shortest_path_length(const RoadGraph& graph, int a, int b) {
  if (b < 0 || static_cast<std::size_t>(b) >= graph.vertex_count())
    throw std::out_of_range("shortest_path_length: unknown vertex id " + std::to_string(b));
  if (a == b) {
    shortest_path_lengths(graph, a, 0.0);  // validates a
    return 0.0;
  }
  const auto dist = shortest_path_lengths(graph, a);
  const double d = dist[static_cast<std::size_t>(b)];
  if (d == kUnreachable) return std::nullopt;
  return d;
}

std::vector<int> connected_components(const RoadGraph& graph) {
  std::vector<int> label(graph.vertex_count(), -1);
  int next = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < label.size(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& inc : graph.incident(u)) {
        if (label[static_cast<std::size_t>(inc.neighbor)] < 0) {
          label[static_cast<std::size_t>(inc.neighbor)] = next;
          stack.push_back(inc.neighbor);
        }
      }
    }
    ++next;
  }
  return label;
}

// ---------------------------------------------------------------------------
// SimplifiedGraph

double SimplifiedGraph::total_length() const {
  double sum = 0.0;
  for (const auto& e : edges_) sum += e.length;
  return sum;
}

std::vector<Point> SimplifiedGraph::polyline(int e) const {
  std::vector<Point> out;
  const auto& chain = edges_.at(static_cast<std::size_t>(e)).chain;
  out.reserve(chain.size());
  for (int id : chain) out.push_back(source_points_[static_cast<std::size_t>(id)]);
  return out;
}

std::optional<double> SimplifiedGraph::shortest_path_length(int a, int b) const {
  const std::size_t n = retained_.size();
  if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n)
    throw std::out_of_range("SimplifiedGraph::shortest_path_length: unknown vertex");
  std::vector<double> dist(n, kUnreachable);
  MinQueue queue;
  dist[static_cast<std::size_t>(a)] = 0.0;
  queue.emplace(0.0, a);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (u == b) return d;
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& [w, e] : adjacency_[static_cast<std::size_t>(u)]) {
      const double nd = d + edges_[static_cast<std::size_t>(e)].length;
      if (nd < dist[static_cast<std::size_t>(w)]) {
        dist[static_cast<std::size_t>(w)] = nd;
        queue.emplace(nd, w);
      }
    }
  }
  return std::nullopt;
}

SimplifiedGraph simplify_graph(const RoadGraph& graph) {
  SimplifiedGraph s;
  s.extent_ = graph.extent();
  const std::size_t n = graph.vertex_count();
  s.source_points_.reserve(n);
  for (const Node& node : graph.nodes()) s.source_points_.push_back(node.point());

  std::vector<int> slot(n, -1);
  for (const Node& node : graph.nodes()) {
    if (node.degree != 2) {
      slot[static_cast<std::size_t>(node.id)] = static_cast<int>(s.retained_.size());
      s.retained_.push_back(node.id);
    }
  }

  std::vector<char> used(graph.edge_count(), 0);
  // Follows a chain starting at `start` through edge `first_edge`.
  auto walk = [&](int start, int first_edge, int first_next) {
    PolylineEdge pe;
    pe.u = slot[static_cast<std::size_t>(start)];
    pe.chain.push_back(start);
    int prev_edge = first_edge;
    int cur = first_next;
    used[static_cast<std::size_t>(first_edge)] = 1;
    pe.length += graph.edge_length(first_edge);
    pe.chain.push_back(cur);
    while (slot[static_cast<std::size_t>(cur)] < 0) {
      int next_edge = -1, next = -1;
      for (const auto& inc : graph.incident(cur)) {
        if (inc.edge != prev_edge) {
          next_edge = inc.edge;
          next = inc.neighbor;
          break;
        }
      }
      used[static_cast<std::size_t>(next_edge)] = 1;
      pe.length += graph.edge_length(next_edge);
      pe.chain.push_back(next);
      prev_edge = next_edge;
      cur = next;
    }
    pe.v = slot[static_cast<std::size_t>(cur)];
    s.edges_.push_back(std::move(pe));
  };

  for (int r : std::vector<int>(s.retained_)) {
    for (const auto& inc : graph.incident(r)) {
      if (!used[static_cast<std::size_t>(inc.edge)]) walk(r, inc.edge, inc.neighbor);
    }
  }

  // Whatever remains forms isolated cycles of degree-2 vertices.
  auto before = [&](int a, int b) {
    const Point pa = graph.point(a), pb = graph.point(b);
    if (pa.y != pb.y) return pa.y < pb.y;
    if (pa.x != pb.x) return pa.x < pb.x;
    return a < b;
  };
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    if (used[e]) continue;
    // Collect the cycle to choose a geometric anchor.
    std::vector<int> cycle;
    int start = graph.edges()[e].u;
    int prev_edge = -1, cur = start;
    do {
      cycle.push_back(cur);
      for (const auto& inc : graph.incident(cur)) {
        if (inc.edge != prev_edge) {
          prev_edge = inc.edge;
          cur = inc.neighbor;
          break;
        }
      }
    } while (cur != start);
    const int anchor = *std::min_element(cycle.begin(), cycle.end(), before);
    slot[static_cast<std::size_t>(anchor)] = static_cast<int>(s.retained_.size());
    s.retained_.push_back(anchor);
    const auto inc = graph.incident(anchor);
    const auto& first = before(inc[0].neighbor, inc[1].neighbor) ? inc[0] : inc[1];
    walk(anchor, first.edge, first.neighbor);
  }

  s.points_.reserve(s.retained_.size());
  for (int id : s.retained_) s.points_.push_back(graph.point(id));
  s.adjacency_.resize(s.retained_.size());
  for (std::size_t k = 0; k < s.edges_.size(); ++k) {
    const auto& pe = s.edges_[k];
    s.adjacency_[static_cast<std::size_t>(pe.u)].emplace_back(pe.v, static_cast<int>(k));
    if (pe.v != pe.u)
      s.adjacency_[static_cast<std::size_t>(pe.v)].emplace_back(pe.u, static_cast<int>(k));
  }
  return s;
}

}  // namespace roadgraph
