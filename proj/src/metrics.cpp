#include "roadgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "roadgraph/rng.hpp"

namespace roadgraph {

void TopoConfig::validate() const {
  if (!(seed_interval > 0.0 && propagation > 0.0 && marker_spacing > 0.0 && match_radius > 0.0))
    throw std::invalid_argument("TOPO parameters must be positive");
  if (match_radius > 2.0 * marker_spacing)
    throw std::invalid_argument("TOPO matching radius must not exceed twice the marker spacing");
}

void AplsConfig::validate() const {
  if (!(snap_radius > 0.0 && injection_interval > 0.0) || max_pairs < 1)
    throw std::invalid_argument("APLS parameters must be positive");
}

namespace {

constexpr double kTol = 1e-9;

using QueueEntry = std::pair<double, int>;
using MinQueue = std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>>;

/// Uniform grid over edge bounding boxes for nearest-edge queries.
class SegmentLocator {
 public:
  SegmentLocator(const RoadGraph& graph, double cell) : graph_(graph), cell_(cell) {
    for (std::size_t e = 0; e < graph.edge_count(); ++e) {
      const Point a = graph.point(graph.edges()[e].u), b = graph.point(graph.edges()[e].v);
      const auto x0 = cell_of(std::min(a.x, b.x)), x1 = cell_of(std::max(a.x, b.x));
      const auto y0 = cell_of(std::min(a.y, b.y)), y1 = cell_of(std::max(a.y, b.y));
      for (auto cx = x0; cx <= x1; ++cx)
        for (auto cy = y0; cy <= y1; ++cy) cells_[key(cx, cy)].push_back(static_cast<int>(e));
    }
  }

  std::optional<GraphLocation> nearest(Point p, double radius) const {
    std::optional<GraphLocation> best;
    double best_d = radius;
    const auto x0 = cell_of(p.x - radius), x1 = cell_of(p.x + radius);
    const auto y0 = cell_of(p.y - radius), y1 = cell_of(p.y + radius);
    int best_edge = -1;
    for (auto cx = x0; cx <= x1; ++cx) {
      for (auto cy = y0; cy <= y1; ++cy) {
        const auto it = cells_.find(key(cx, cy));
        if (it == cells_.end()) continue;
        for (int e : it->second) {
          const Edge& edge = graph_.edges()[static_cast<std::size_t>(e)];
          const auto proj = project_onto_segment(p, graph_.point(edge.u), graph_.point(edge.v));
          if (proj.distance < best_d || (proj.distance == best_d && (best_edge < 0 || e < best_edge))) {
            best_d = proj.distance;
            best_edge = e;
            best = GraphLocation{e, proj.t * graph_.edge_length(e), proj.point};
          }
        }
      }
    }
    return best;
  }

 private:
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::int64_t key(std::int64_t cx, std::int64_t cy) {
    return (cx + (1LL << 30)) * (1LL << 31) + (cy + (1LL << 30));
  }

  const RoadGraph& graph_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
};

/// Geodesic distances from a location on an edge, bounded.
std::vector<double> distances_from(const RoadGraph& graph, const GraphLocation& loc,
                                   double bound = kUnreachable) {
  std::vector<double> dist(graph.vertex_count(), kUnreachable);
  const Edge& e = graph.edges()[static_cast<std::size_t>(loc.edge)];
  const double len = graph.edge_length(loc.edge);
  MinQueue queue;
  auto seed = [&](int v, double d) {
    if (d <= bound && d < dist[static_cast<std::size_t>(v)]) {
      dist[static_cast<std::size_t>(v)] = d;
      queue.emplace(d, v);
    }
  };
  seed(e.u, loc.offset);
  seed(e.v, len - loc.offset);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& inc : graph.incident(u)) {
      const double nd = d + graph.edge_length(inc.edge);
      if (nd <= bound && nd < dist[static_cast<std::size_t>(inc.neighbor)]) {
        dist[static_cast<std::size_t>(inc.neighbor)] = nd;
        queue.emplace(nd, inc.neighbor);
      }
    }
  }
  return dist;
}

double location_distance(const RoadGraph& graph, const std::vector<double>& dist,
                         const GraphLocation& from, const GraphLocation& to) {
  const Edge& e = graph.edges()[static_cast<std::size_t>(to.edge)];
  const double len = graph.edge_length(to.edge);
  double d = std::min(dist[static_cast<std::size_t>(e.u)] + to.offset,
                      dist[static_cast<std::size_t>(e.v)] + (len - to.offset));
  if (from.edge == to.edge) d = std::min(d, std::abs(from.offset - to.offset));
  return d;
}

bool is_multiple(double d, double spacing) {
  const double k = std::round(d / spacing);
  return std::abs(d - k * spacing) <= kTol;
}

/// Location at arc length `s` along a chain of source-graph vertex ids.
GraphLocation locate_on_chain(const RoadGraph& graph, const std::vector<int>& chain, double s) {
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const int a = chain[i], b = chain[i + 1];
    int edge = -1;
    for (const auto& inc : graph.incident(a)) {
      if (inc.neighbor == b) {
        edge = inc.edge;
        break;
      }
    }
    const double len = graph.edge_length(edge);
    if (s <= len || i + 2 == chain.size()) {
      s = std::clamp(s, 0.0, len);
      const Edge& e = graph.edges()[static_cast<std::size_t>(edge)];
      const double offset = (e.u == a) ? s : len - s;
      const Point pa = graph.point(e.u), pb = graph.point(e.v);
      const double t = len > 0.0 ? offset / len : 0.0;
      return {edge, offset, pa + (pb - pa) * t};
    }
    s -= len;
  }
  throw std::logic_error("locate_on_chain: empty chain");
}

/// Greedy nearest-first one-to-one matching; returns the number of matches.
std::size_t greedy_match(const std::vector<Point>& marbles, const std::vector<Point>& holes,
                         double radius) {
  if (marbles.empty() || holes.empty()) return 0;
  const SpatialIndex index(holes, std::max(radius, 1.0));
  struct Candidate {
    double d;
    int marble;
    int hole;
  };
  std::vector<Candidate> cand;
  for (std::size_t i = 0; i < marbles.size(); ++i) {
    for (int j : index.query(marbles[i], radius))
      cand.push_back({distance(marbles[i], holes[static_cast<std::size_t>(j)]), static_cast<int>(i), j});
  }
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.marble != b.marble) return a.marble < b.marble;
    return a.hole < b.hole;
  });
  std::vector<char> used_m(marbles.size(), 0), used_h(holes.size(), 0);
  std::size_t matched = 0;
  for (const Candidate& c : cand) {
    if (used_m[static_cast<std::size_t>(c.marble)] || used_h[static_cast<std::size_t>(c.hole)]) continue;
    used_m[static_cast<std::size_t>(c.marble)] = used_h[static_cast<std::size_t>(c.hole)] = 1;
    ++matched;
  }
  return matched;
}

}  // namespace

std::optional<GraphLocation> nearest_location(const RoadGraph& graph, Point p, double radius) {
  if (graph.edge_count() == 0) return std::nullopt;
  return SegmentLocator(graph, std::max(radius, 16.0)).nearest(p, radius);
}

std::vector<Point> geodesic_markers(const RoadGraph& graph, const GraphLocation& start,
                                    double max_distance, double spacing) {
  const auto dist = distances_from(graph, start, max_distance);
  std::vector<Point> markers;

  std::vector<int> edges;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (dist[v] == kUnreachable) continue;
    if (is_multiple(dist[v], spacing)) markers.push_back(graph.point(static_cast<int>(v)));
    for (const auto& inc : graph.incident(static_cast<int>(v))) edges.push_back(inc.edge);
  }
  edges.push_back(start.edge);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<double> cand;
  for (int e : edges) {
    const Edge& edge = graph.edges()[static_cast<std::size_t>(e)];
    const double len = graph.edge_length(e);
    const double du = dist[static_cast<std::size_t>(edge.u)];
    const double dv = dist[static_cast<std::size_t>(edge.v)];
    const bool on_start = e == start.edge;
    auto geodesic = [&](double s) {
      double d = std::min(du + s, dv + (len - s));
      if (on_start) d = std::min(d, std::abs(s - start.offset));
      return d;
    };
    cand.clear();
    auto consider = [&](double s, double level) {
      if (s <= kTol || s >= len - kTol) return;  // endpoints are vertex markers
      if (level > max_distance + kTol) return;
      if (geodesic(s) < level - kTol) return;    // another branch is shorter here
      cand.push_back(s);
    };
    if (du != kUnreachable) {
      for (double k = std::ceil((du - kTol) / spacing); k * spacing <= std::min(du + len, max_distance) + kTol; k += 1.0)
        consider(k * spacing - du, k * spacing);
    }
    if (dv != kUnreachable) {
      for (double k = std::ceil((dv - kTol) / spacing); k * spacing <= std::min(dv + len, max_distance) + kTol; k += 1.0)
        consider(len - (k * spacing - dv), k * spacing);
    }
    if (on_start) {
      for (double k = 0.0; k * spacing <= max_distance + kTol; k += 1.0) {
        const double ahead = start.offset + k * spacing, behind = start.offset - k * spacing;
        if (ahead > len && behind < 0.0) break;
        consider(ahead, k * spacing);
        if (k > 0.0) consider(behind, k * spacing);
      }
    }
    std::sort(cand.begin(), cand.end());
    const Point a = graph.point(edge.u), b = graph.point(edge.v);
    double last = -1.0;
    for (double s : cand) {
      if (last >= 0.0 && s - last <= 1e-7) continue;
      last = s;
      markers.push_back(a + (b - a) * (s / len));
    }
  }
  return markers;
}

TopoResult topo(const RoadGraph& gt, const RoadGraph& proposal, const TopoConfig& cfg) {
  cfg.validate();
  if (gt.edge_count() == 0) throw std::invalid_argument("TOPO is undefined for an empty ground truth");
  TopoResult out;
  const SimplifiedGraph chains = simplify_graph(gt);
  std::optional<SegmentLocator> locator;
  if (proposal.edge_count() > 0) locator.emplace(proposal, std::max(cfg.match_radius, 16.0));

  for (const PolylineEdge& chain : chains.edges()) {
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(chain.length / cfg.seed_interval)));
    for (std::size_t i = 0; i < count; ++i) {
      const double s = (static_cast<double>(i) + 0.5) * chain.length / static_cast<double>(count);
      const GraphLocation seed = locate_on_chain(gt, chain.chain, s);
      const auto holes = geodesic_markers(gt, seed, cfg.propagation, cfg.marker_spacing);
      ++out.seeds;
      out.holes += holes.size();
      if (!locator) continue;
      const auto snapped = locator->nearest(seed.point, cfg.match_radius);
      if (!snapped) continue;
      ++out.matched_seeds;
      const auto marbles = geodesic_markers(proposal, *snapped, cfg.propagation, cfg.marker_spacing);
      out.marbles += marbles.size();
      out.matched += greedy_match(marbles, holes, cfg.match_radius);
    }
  }
  out.precision = out.marbles > 0 ? static_cast<double>(out.matched) / static_cast<double>(out.marbles) : 0.0;
  out.recall = out.holes > 0 ? static_cast<double>(out.matched) / static_cast<double>(out.holes) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

namespace {

/// Control points of a graph: simplified vertices plus points injected along
/// every simplified edge, joined in polyline order.
struct ControlGraph {
  std::vector<Point> points;
  std::vector<std::vector<std::pair<int, double>>> adjacency;

  std::vector<double> distances(int source) const {
    std::vector<double> dist(points.size(), kUnreachable);
    MinQueue queue;
    dist[static_cast<std::size_t>(source)] = 0.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      const auto [d, u] = queue.top();
      queue.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      for (const auto& [w, len] : adjacency[static_cast<std::size_t>(u)]) {
        const double nd = d + len;
        if (nd < dist[static_cast<std::size_t>(w)]) {
          dist[static_cast<std::size_t>(w)] = nd;
          queue.emplace(nd, w);
        }
      }
    }
    return dist;
  }
};

ControlGraph control_graph(const RoadGraph& graph, double interval) {
  const SimplifiedGraph s = simplify_graph(graph);
  ControlGraph cg;
  for (std::size_t k = 0; k < s.vertex_count(); ++k) cg.points.push_back(s.point(static_cast<int>(k)));
  cg.adjacency.resize(cg.points.size());
  auto link = [&](int a, int b, double len) {
    if (a == b) return;
    cg.adjacency[static_cast<std::size_t>(a)].emplace_back(b, len);
    cg.adjacency[static_cast<std::size_t>(b)].emplace_back(a, len);
  };
  for (std::size_t e = 0; e < s.edges().size(); ++e) {
    const PolylineEdge& pe = s.edges()[e];
    const auto line = s.polyline(static_cast<int>(e));
    const auto pieces = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(pe.length / interval - kTol)));
    // Cumulative arc length along the polyline.
    std::vector<double> cum(line.size(), 0.0);
    for (std::size_t i = 1; i < line.size(); ++i) cum[i] = cum[i - 1] + distance(line[i - 1], line[i]);
    const double total = cum.back();
    int prev = pe.u;
    double prev_s = 0.0;
    std::size_t seg = 0;
    for (std::size_t k = 1; k < pieces; ++k) {
      const double target = total * static_cast<double>(k) / static_cast<double>(pieces);
      while (seg + 2 < line.size() && cum[seg + 1] < target) ++seg;
      const double seg_len = cum[seg + 1] - cum[seg];
      const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
      const int id = static_cast<int>(cg.points.size());
      cg.points.push_back(line[seg] + (line[seg + 1] - line[seg]) * t);
      cg.adjacency.emplace_back();
      link(prev, id, target - prev_s);
      prev = id;
      prev_s = target;
    }
    link(prev, pe.v, total - prev_s);
  }
  return cg;
}

/// 1 - mean relative path-length error of `reference` pairs measured on `other`.
double directional_score(const RoadGraph& reference, const RoadGraph& other, const AplsConfig& cfg,
                         std::uint64_t seed, std::size_t& pair_count) {
  const ControlGraph cg = control_graph(reference, cfg.injection_interval);
  const std::size_t n = cg.points.size();

  // Component labels over the control graph.
  std::vector<int> comp(n, -1);
  int next = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack{static_cast<int>(s)};
    comp[s] = next;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& [w, len] : cg.adjacency[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(w)] < 0) {
          comp[static_cast<std::size_t>(w)] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (comp[i] == comp[j]) pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
  if (pairs.size() > static_cast<std::size_t>(cfg.max_pairs)) {
    Rng rng(derive_seed(seed, 0xA915));
    const auto take = static_cast<std::size_t>(cfg.max_pairs);
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pairs.size() - i));
      std::swap(pairs[i], pairs[j]);
    }
    pairs.resize(take);
    std::sort(pairs.begin(), pairs.end());
  }
  pair_count = pairs.size();
  if (pairs.empty()) return 0.0;

  std::vector<std::optional<GraphLocation>> snapped(n);
  if (other.edge_count() > 0) {
    const SegmentLocator locator(other, std::max(cfg.snap_radius, 16.0));
    for (std::size_t i = 0; i < n; ++i) snapped[i] = locator.nearest(cg.points[i], cfg.snap_radius);
  }

  double penalty = 0.0;
  std::size_t k = 0;
  while (k < pairs.size()) {
    const int src = pairs[k].first;
    const auto ref_dist = cg.distances(src);
    std::vector<double> other_dist;
    if (snapped[static_cast<std::size_t>(src)]) other_dist = distances_from(other, *snapped[static_cast<std::size_t>(src)]);
    for (; k < pairs.size() && pairs[k].first == src; ++k) {
      const int dst = pairs[k].second;
      const double l_ref = ref_dist[static_cast<std::size_t>(dst)];
      const auto& a = snapped[static_cast<std::size_t>(src)];
      const auto& b = snapped[static_cast<std::size_t>(dst)];
      if (!a || !b || !(l_ref > 0.0)) {
        penalty += 1.0;
        continue;
      }
      const double l_other = location_distance(other, other_dist, *a, *b);
      penalty += l_other == kUnreachable ? 1.0 : std::min(1.0, std::abs(l_ref - l_other) / l_ref);
    }
  }
  return 1.0 - penalty / static_cast<double>(pairs.size());
}

}  // namespace

AplsResult apls(const RoadGraph& gt, const RoadGraph& proposal, const AplsConfig& cfg,
                std::uint64_t seed) {
  cfg.validate();
  const bool gt_empty = gt.edge_count() == 0, prop_empty = proposal.edge_count() == 0;
  if (gt_empty && prop_empty) throw std::invalid_argument("APLS is undefined when both graphs are empty");
  AplsResult out;
  if (gt_empty || prop_empty) return out;
  out.gt_to_proposal = directional_score(gt, proposal, cfg, seed, out.gt_pairs);
  out.proposal_to_gt = directional_score(proposal, gt, cfg, seed, out.proposal_pairs);
  out.apls = 0.5 * (out.gt_to_proposal + out.proposal_to_gt);
  return out;
}

MetricsReport evaluate(const RoadGraph& gt, const RoadGraph& proposal, const TopoConfig& topo_cfg,
                       const AplsConfig& apls_cfg, std::uint64_t seed) {
  MetricsReport r;
  r.topo = topo(gt, proposal, topo_cfg);
  if (gt.edge_count() > 0 || proposal.edge_count() > 0) r.apls = apls(gt, proposal, apls_cfg, seed);
  return r;
}

}  // namespace roadgraph
