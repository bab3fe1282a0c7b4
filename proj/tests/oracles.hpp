#pragma once

// Brute-force reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "roadgraph/connectivity.hpp"
#include "roadgraph/graph.hpp"
#include "roadgraph/mask_ops.hpp"
#include "roadgraph/pipeline.hpp"
#include "roadgraph/rng.hpp"
#include "roadgraph/synth.hpp"

namespace roadgraph::oracle {

/// Greedy suppression over the whole mask, recomputing the maximum each round.
inline std::vector<Peak> nms(const ProbabilityMask& mask, double threshold, double radius) {
  const int h = mask.height(), w = mask.width();
  std::vector<char> alive(static_cast<std::size_t>(h * w), 1);
  std::vector<Peak> out;
  for (;;) {
    int best = -1;
    float best_v = -1.0f;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const float v = mask.at(r, c);
        if (!alive[static_cast<std::size_t>(r * w + c)] || v < threshold) continue;
        if (v > best_v) {
          best_v = v;
          best = r * w + c;
        }
      }
    if (best < 0) return out;
    const int br = best / w, bc = best % w;
    out.push_back({Point{double(bc), double(br)}, best_v});
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (std::hypot(double(r - br), double(c - bc)) <= radius) alive[static_cast<std::size_t>(r * w + c)] = 0;
  }
}

/// Floyd-Warshall over Euclidean edge weights; infinity when unreachable.
inline std::vector<std::vector<double>> all_pairs(const RoadGraph& g) {
  const std::size_t n = g.vertex_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const Edge& e : g.edges()) {
    const double len = distance(g.point(e.u), g.point(e.v));
    d[e.u][e.v] = std::min(d[e.u][e.v], len);
    d[e.v][e.u] = std::min(d[e.v][e.u], len);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

/// Plain O(V^2) Dijkstra.
inline std::vector<double> dijkstra(const RoadGraph& g, int source) {
  const std::size_t n = g.vertex_count();
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  std::vector<char> done(n, 0);
  d[static_cast<std::size_t>(source)] = 0.0;
  for (std::size_t it = 0; it < n; ++it) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!done[i] && (u == n || d[i] < d[u])) u = i;
    if (u == n || std::isinf(d[u])) break;
    done[u] = 1;
    for (const auto& inc : g.incident(static_cast<int>(u))) {
      const double nd = d[u] + g.edge_length(inc.edge);
      if (nd < d[static_cast<std::size_t>(inc.neighbor)]) d[static_cast<std::size_t>(inc.neighbor)] = nd;
    }
  }
  return d;
}

inline double bilinear(const ProbabilityMask& m, Point p) {
  const double x = std::clamp(p.x, 0.0, double(m.width() - 1));
  const double y = std::clamp(p.y, 0.0, double(m.height() - 1));
  const int c0 = int(std::floor(x)), r0 = int(std::floor(y));
  const int c1 = std::min(c0 + 1, m.width() - 1), r1 = std::min(r0 + 1, m.height() - 1);
  const double fx = x - c0, fy = y - r0;
  return (1 - fx) * (1 - fy) * m.at(r0, c0) + fx * (1 - fy) * m.at(r0, c1) + (1 - fx) * fy * m.at(r1, c0) +
         fx * fy * m.at(r1, c1);
}

/// True when the closed segments ab and cd touch at a point that is not an
/// endpoint shared by both.
inline bool segments_cross(Point a, Point b, Point c, Point d) {
  auto orient = [](Point p, Point q, Point r) { return cross(q - p, r - p); };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  const double eps = 1e-9;
  const bool proper = ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
                      ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps));
  if (proper) return true;
  auto on_segment = [&](Point p, Point q, Point r) {
    return std::abs(orient(p, q, r)) <= eps && std::min(p.x, q.x) - eps <= r.x && r.x <= std::max(p.x, q.x) + eps &&
           std::min(p.y, q.y) - eps <= r.y && r.y <= std::max(p.y, q.y) + eps;
  };
  // Touching: an endpoint of one lies on the other without being shared.
  auto shared = [](Point p, Point q) { return distance(p, q) <= 1e-9; };
  if (!shared(c, a) && !shared(c, b) && on_segment(a, b, c)) return true;
  if (!shared(d, a) && !shared(d, b) && on_segment(a, b, d)) return true;
  if (!shared(a, c) && !shared(a, d) && on_segment(c, d, a)) return true;
  if (!shared(b, c) && !shared(b, d) && on_segment(c, d, b)) return true;
  return false;
}

/// Copy of g with vertices permuted and edge order and orientation shuffled.
inline RoadGraph relabeled(const RoadGraph& g, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = g.vertex_count();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<RawVertex> verts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = g.node(perm[i]);
    verts[i] = {static_cast<std::int64_t>(1000 + 7 * perm[i]), node.x, node.y};
  }
  std::vector<RawEdge> edges;
  for (const Edge& e : g.edges()) {
    RawEdge r{1000 + 7 * e.u, 1000 + 7 * e.v};
    if (rng.bernoulli(0.5)) std::swap(r.first, r.second);
    edges.push_back(r);
  }
  for (std::size_t i = edges.size(); i > 1; --i) std::swap(edges[i - 1], edges[rng.below(i)]);
  return build_graph(verts, edges, g.extent());
}

/// g without the listed edge indices.
inline RoadGraph without_edges(const RoadGraph& g, const std::vector<int>& drop) {
  std::vector<char> gone(g.edge_count(), 0);
  for (int e : drop) gone[static_cast<std::size_t>(e)] = 1;
  std::vector<Point> pts;
  for (const Node& n : g.nodes()) pts.push_back(n.point());
  std::vector<Edge> keep;
  for (std::size_t e = 0; e < g.edge_count(); ++e)
    if (!gone[e]) keep.push_back(g.edges()[e]);
  return build_graph(pts, keep, g.extent());
}

inline RoadGraph random_graph(int vertices, int edges, Extent extent, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> pts;
  for (int i = 0; i < vertices; ++i)
    pts.push_back({rng.uniform(0, extent.width - 1e-6), rng.uniform(0, extent.height - 1e-6)});
  std::vector<Edge> es;
  for (int i = 0; i < edges; ++i) {
    int u = int(rng.below(std::uint64_t(vertices))), v = int(rng.below(std::uint64_t(vertices)));
    if (u == v) continue;
    es.push_back({std::min(u, v), std::max(u, v)});
  }
  return build_graph(pts, es, extent);
}

/// Random [0,1] mask with plateaus so ties are common.
inline ProbabilityMask random_mask(int h, int w, Rng& rng, int levels = 0) {
  std::vector<float> v(static_cast<std::size_t>(h * w));
  for (auto& x : v) {
    const double u = rng.uniform();
    x = levels > 0 ? float(std::floor(u * levels) / levels) : float(u);
  }
  return ProbabilityMask(h, w, std::move(v));
}

/// Largest relative error between the analytic gradient and a fourth-order
/// central difference; components where both are below `floor` compare absolutely.
inline double gradient_rel_error(const Classifier& model, const Batch& batch, double h = 1e-4,
                                 double floor = 1e-6) {
  std::vector<double> analytic(model.parameters().size(), 0.0);
  model.loss_and_gradient(batch, analytic);
  Classifier probe = model;
  std::vector<double> scratch(analytic.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double x = probe.parameters()[i];
    auto at = [&](double d) {
      probe.parameters()[i] = x + d;
      return probe.loss_and_gradient(batch, scratch);
    };
    const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    probe.parameters()[i] = x;
    const double err = std::abs(numeric - analytic[i]) / std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

/// Random network and batch for gradient checks.
inline std::pair<Classifier, Batch> random_problem(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> sizes{2 + int(rng.below(10))};
  const int hidden = 1 + int(rng.below(3));
  for (int i = 0; i < hidden; ++i) sizes.push_back(1 + int(rng.below(12)));
  sizes.push_back(1);
  Classifier model = Classifier::initialized(sizes, seed);
  for (double& p : model.parameters()) p += rng.uniform(-0.3, 0.3);
  Batch batch;
  const int n = 1 + int(rng.below(16));
  std::vector<double> x(static_cast<std::size_t>(sizes[0]));
  for (int i = 0; i < n; ++i) {
    for (double& v : x) v = rng.uniform(-1, 1);
    batch.push(x, rng.bernoulli(0.5) ? 1.0 : 0.0);
  }
  return {std::move(model), std::move(batch)};
}

inline Scene as_scene(const SyntheticScene& s, std::string name = "scene") {
  return Scene{std::move(name), s.gt, s.road, s.keypoint, s.features};
}

/// Clean urban scene at the benchmark default size.
inline SyntheticScene small_scene(std::uint64_t seed, int extent = 256, CorruptionSpec cspec = {}) {
  SceneSpec spec;
  spec.seed = seed;
  spec.extent = extent;
  return make_scene(spec, cspec);
}

}  // namespace roadgraph::oracle
