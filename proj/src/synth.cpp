#include "roadgraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>

#include "roadgraph/rng.hpp"

namespace roadgraph {

std::string to_string(SceneStyle style) {
  switch (style) {
    case SceneStyle::UrbanGrid: return "urban-grid";
    case SceneStyle::RuralCurves: return "rural-curves";
    case SceneStyle::Mixed: return "mixed";
  }
  return "unknown";
}

SceneStyle parse_style(const std::string& name) {
  if (name == "urban-grid") return SceneStyle::UrbanGrid;
  if (name == "rural-curves") return SceneStyle::RuralCurves;
  if (name == "mixed") return SceneStyle::Mixed;
  throw std::invalid_argument("unknown scene style '" + name + "'");
}

void SceneSpec::validate() const {
  if (extent < 128) throw std::invalid_argument("scene extent must be >= 128");
  if (!(road_width >= 1.0)) throw std::invalid_argument("road width must be >= 1");
  if (!(junction_density >= 0.0)) throw std::invalid_argument("junction density must be >= 0");
  if (!(jitter >= 0.0 && margin >= 0.0 && min_separation >= 0.0 && node_spacing >= 0.0))
    throw std::invalid_argument("scene generator knobs must be >= 0");
  if (!(diagonal_probability >= 0.0 && diagonal_probability <= 1.0 && drop_probability >= 0.0 &&
        drop_probability <= 1.0))
    throw std::invalid_argument("scene generator probabilities must lie in [0,1]");
  if (2.0 * margin >= extent) throw std::invalid_argument("scene margin leaves no room for roads");
}

void CorruptionSpec::validate() const {
  if (occlusions < 0 || !(occlusion_min >= 0.0) || !(occlusion_max >= occlusion_min) ||
      !(warp >= 0.0) || !(noise >= 0.0) || !(blur >= 0.0))
    throw std::invalid_argument("corruption parameters must be nonnegative with min <= max");
}

namespace {

struct Sketch {
  std::vector<Point> points;
  std::vector<std::pair<int, int>> edges;

  int add(Point p) {
    points.push_back(p);
    return static_cast<int>(points.size()) - 1;
  }
  std::vector<int> degrees() const {
    std::vector<int> d(points.size(), 0);
    for (const auto& [a, b] : edges) {
      ++d[static_cast<std::size_t>(a)];
      ++d[static_cast<std::size_t>(b)];
    }
    return d;
  }
  /// Drops self-loops and duplicate edges, then unreferenced points.
  void normalize() {
    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> kept;
    for (auto [a, b] : edges) {
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (seen.insert({a, b}).second) kept.emplace_back(a, b);
    }
    std::vector<int> remap(points.size(), -1);
    std::vector<Point> pts;
    for (auto& [a, b] : kept) {
      for (int* v : {&a, &b}) {
        if (remap[static_cast<std::size_t>(*v)] < 0) {
          remap[static_cast<std::size_t>(*v)] = static_cast<int>(pts.size());
          pts.push_back(points[static_cast<std::size_t>(*v)]);
        }
        *v = remap[static_cast<std::size_t>(*v)];
      }
    }
    points = std::move(pts);
    edges = std::move(kept);
  }
};

double lattice_spacing(double density) { return 1000.0 / std::sqrt(density); }

void add_lattice(Sketch& s, const SceneSpec& spec, double spacing, Rng& rng) {
  const double span = spec.extent - 2.0 * spec.margin;
  // At least a 2x2 block so sparse specs on small scenes still get roads.
  const int count = std::max(2, static_cast<int>(std::floor(span / spacing)) + 1);
  spacing = std::min(spacing, span);
  const double start = spec.margin + (span - (count - 1) * spacing) / 2.0;
  const double lo = spec.margin, hi = spec.extent - 1.0 - spec.margin;
  std::vector<int> id(static_cast<std::size_t>(count * count));
  for (int r = 0; r < count; ++r) {
    for (int c = 0; c < count; ++c) {
      Point p{start + c * spacing, start + r * spacing};
      if (spec.jitter > 0.0) {
        p.x += rng.uniform(-spec.jitter, spec.jitter);
        p.y += rng.uniform(-spec.jitter, spec.jitter);
      }
      p.x = std::clamp(p.x, lo, hi);
      p.y = std::clamp(p.y, lo, hi);
      id[static_cast<std::size_t>(r * count + c)] = s.add(p);
    }
  }
  auto at = [&](int r, int c) { return id[static_cast<std::size_t>(r * count + c)]; };
  for (int r = 0; r < count; ++r) {
    for (int c = 0; c < count; ++c) {
      if (c + 1 < count && !rng.bernoulli(spec.drop_probability)) s.edges.emplace_back(at(r, c), at(r, c + 1));
      if (r + 1 < count && !rng.bernoulli(spec.drop_probability)) s.edges.emplace_back(at(r, c), at(r + 1, c));
      if (r + 1 < count && c + 1 < count && rng.bernoulli(spec.diagonal_probability)) {
        if (rng.bernoulli(0.5)) s.edges.emplace_back(at(r, c), at(r + 1, c + 1));
        else s.edges.emplace_back(at(r, c + 1), at(r + 1, c));
      }
    }
  }
}

Point border_point(int side, double t, const SceneSpec& spec) {
  const double lo = spec.margin, hi = spec.extent - 1.0 - spec.margin;
  const double v = lo + t * (hi - lo);
  switch (side) {
    case 0: return {v, lo};
    case 1: return {hi, v};
    case 2: return {v, hi};
    default: return {lo, v};
  }
}

void add_curves(Sketch& s, const SceneSpec& spec, int curves, Rng& rng) {
  const double lo = spec.margin, hi = spec.extent - 1.0 - spec.margin;
  for (int k = 0; k < curves; ++k) {
    const int side0 = static_cast<int>(rng.below(4));
    const int side1 = (side0 + 1 + static_cast<int>(rng.below(3))) % 4;
    const Point p0 = border_point(side0, rng.uniform(0.1, 0.9), spec);
    const Point p1 = border_point(side1, rng.uniform(0.1, 0.9), spec);
    const Point d = p1 - p0;
    const double len = norm(d);
    if (len < 32.0) continue;
    const Point perp{-d.y / len, d.x / len};
    const double amp = rng.uniform(8.0, 24.0);
    const double freq = 0.5 * static_cast<double>(1 + rng.below(3));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int pieces = std::max(2, static_cast<int>(std::ceil(len / 16.0)));
    int prev = -1;
    for (int i = 0; i <= pieces; ++i) {
      const double t = static_cast<double>(i) / pieces;
      const double off = amp * std::sin(std::numbers::pi * t) *
                         std::sin(2.0 * std::numbers::pi * freq * t + phase);
      Point p = p0 + d * t + perp * off;
      p.x = std::clamp(p.x, lo, hi);
      p.y = std::clamp(p.y, lo, hi);
      const int id = s.add(p);
      if (prev >= 0) s.edges.emplace_back(prev, id);
      prev = id;
    }
  }
}

/// Splits edges at proper crossings and at endpoints touching an edge interior.
/// Returns true if anything changed.
bool planarize(Sketch& s) {
  constexpr double eps = 1e-9;
  const std::size_t m = s.edges.size();
  std::vector<std::vector<std::pair<double, int>>> splits(m);
  bool changed = false;
  for (std::size_t i = 0; i < m; ++i) {
    const auto [a, b] = s.edges[i];
    const Point p = s.points[static_cast<std::size_t>(a)], p2 = s.points[static_cast<std::size_t>(b)];
    const Point r = p2 - p;
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto [c, d] = s.edges[j];
      if (a == c || a == d || b == c || b == d) continue;
      const Point q = s.points[static_cast<std::size_t>(c)], q2 = s.points[static_cast<std::size_t>(d)];
      if (std::max(p.x, p2.x) < std::min(q.x, q2.x) || std::max(q.x, q2.x) < std::min(p.x, p2.x) ||
          std::max(p.y, p2.y) < std::min(q.y, q2.y) || std::max(q.y, q2.y) < std::min(p.y, p2.y))
        continue;
      const Point sv = q2 - q;
      const double denom = cross(r, sv);
      if (std::abs(denom) < 1e-12) continue;  // parallel; collinear overlaps are not produced
      const double t = cross(q - p, sv) / denom;
      const double u = cross(q - p, r) / denom;
      if (t < -eps || t > 1.0 + eps || u < -eps || u > 1.0 + eps) continue;
      const bool t_inner = t > eps && t < 1.0 - eps;
      const bool u_inner = u > eps && u < 1.0 - eps;
      if (t_inner && u_inner) {
        const int x = s.add(p + r * t);
        splits[i].emplace_back(t, x);
        splits[j].emplace_back(u, x);
        changed = true;
      } else if (t_inner && !u_inner) {
        splits[i].emplace_back(t, u <= eps ? c : d);
        changed = true;
      } else if (u_inner && !t_inner) {
        splits[j].emplace_back(u, t <= eps ? a : b);
        changed = true;
      }
    }
  }
  if (!changed) return false;
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < m; ++i) {
    auto& sp = splits[i];
    std::sort(sp.begin(), sp.end());
    int prev = s.edges[i].first;
    for (const auto& [t, x] : sp) {
      edges.emplace_back(prev, x);
      prev = x;
    }
    edges.emplace_back(prev, s.edges[i].second);
  }
  s.edges = std::move(edges);
  s.normalize();
  return true;
}

/// Snaps vertices of degree != 2 to integer pixels. Returns true if any moved.
bool round_junctions(Sketch& s, int extent) {
  const auto deg = s.degrees();
  bool moved = false;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    if (deg[i] == 2) continue;
    Point& p = s.points[i];
    const Point q{std::clamp(std::round(p.x), 0.0, extent - 1.0),
                  std::clamp(std::round(p.y), 0.0, extent - 1.0)};
    if (!(q == p)) {
      p = q;
      moved = true;
    }
  }
  return moved;
}

/// Merges vertex pairs closer than `sep` when at least one is a junction or
/// endpoint. The merged vertex keeps the position of its highest-degree member.
bool merge_close(Sketch& s, double sep) {
  if (sep <= 0.0 || s.points.empty()) return false;
  const auto deg = s.degrees();
  std::vector<int> parent(s.points.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  const SpatialIndex index(s.points, std::max(sep, 1.0));
  bool merged = false;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    for (int j : index.query(s.points[i], sep)) {
      if (static_cast<std::size_t>(j) <= i) continue;
      if (deg[i] == 2 && deg[static_cast<std::size_t>(j)] == 2) continue;
      if (distance(s.points[i], s.points[static_cast<std::size_t>(j)]) >= sep) continue;
      const int a = find(static_cast<int>(i)), b = find(j);
      if (a != b) {
        parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        merged = true;
      }
    }
  }
  if (!merged) return false;
  std::map<int, int> best;  // root -> representative member
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const int root = find(static_cast<int>(i));
    auto it = best.find(root);
    if (it == best.end() || deg[i] > deg[static_cast<std::size_t>(it->second)]) best[root] = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < s.points.size(); ++i)
    s.points[i] = s.points[static_cast<std::size_t>(best[find(static_cast<int>(i))])];
  for (auto& [a, b] : s.edges) {
    a = find(a);
    b = find(b);
  }
  s.normalize();
  return true;
}

/// Keeps the three longest connected components.
void keep_largest_components(Sketch& s, std::size_t keep) {
  std::vector<int> parent(s.points.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (const auto& [a, b] : s.edges) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
  }
  std::map<int, double> length;
  for (const auto& [a, b] : s.edges)
    length[find(a)] += distance(s.points[static_cast<std::size_t>(a)], s.points[static_cast<std::size_t>(b)]);
  if (length.size() <= keep) return;
  std::vector<std::pair<double, int>> ranked;
  for (const auto& [root, len] : length) ranked.emplace_back(-len, root);
  std::sort(ranked.begin(), ranked.end());
  std::set<int> kept;
  for (std::size_t i = 0; i < keep; ++i) kept.insert(ranked[i].second);
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : s.edges)
    if (kept.count(find(e.first))) edges.push_back(e);
  s.edges = std::move(edges);
  s.normalize();
}

void densify(Sketch& s, double spacing) {
  if (spacing <= 0.0) return;
  std::vector<std::pair<int, int>> edges;
  for (const auto& [a, b] : s.edges) {
    const Point pa = s.points[static_cast<std::size_t>(a)], pb = s.points[static_cast<std::size_t>(b)];
    const int pieces = static_cast<int>(std::ceil(distance(pa, pb) / spacing - 1e-9));
    int prev = a;
    for (int k = 1; k < pieces; ++k) {
      const int x = s.add(pa + (pb - pa) * (static_cast<double>(k) / pieces));
      edges.emplace_back(prev, x);
      prev = x;
    }
    edges.emplace_back(prev, b);
  }
  s.edges = std::move(edges);
}

}  // namespace

RoadGraph generate_graph(const SceneSpec& spec) {
  spec.validate();
  const Extent extent{spec.extent, spec.extent};
  if (spec.junction_density == 0.0) {
    std::clog << "roadgraph: junction density 0 yields an empty scene\n";
    return build_graph(std::span<const Point>{}, std::span<const Edge>{}, extent);
  }
  Rng rng(derive_seed(spec.seed, 1));
  Sketch s;
  const double expected_junctions =
      spec.junction_density * (spec.extent / 1000.0) * (spec.extent / 1000.0);
  const int curves =
      std::clamp(static_cast<int>(std::lround(std::sqrt(2.0 * expected_junctions))), 2, 12);
  switch (spec.style) {
    case SceneStyle::UrbanGrid:
      add_lattice(s, spec, lattice_spacing(spec.junction_density), rng);
      break;
    case SceneStyle::RuralCurves:
      add_curves(s, spec, curves, rng);
      break;
    case SceneStyle::Mixed:
      add_lattice(s, spec, 1.6 * lattice_spacing(spec.junction_density), rng);
      add_curves(s, spec, 2, rng);
      break;
  }
  s.normalize();

  for (int iter = 0; iter < 16; ++iter) {
    bool changed = planarize(s);
    changed |= round_junctions(s, spec.extent);
    changed |= merge_close(s, spec.min_separation);
    if (!changed) break;
  }
  keep_largest_components(s, 3);
  densify(s, spec.node_spacing);

  std::vector<Edge> edges;
  edges.reserve(s.edges.size());
  for (const auto& [a, b] : s.edges) edges.push_back({a, b});
  return build_graph(s.points, edges, extent);
}

// ---------------------------------------------------------------------------
// Rendering

double road_profile(double d, double road_width) {
  const double half = road_width / 2.0;
  if (d <= half) return 1.0;
  if (d >= half + kRoadFalloff) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (d - half) / kRoadFalloff));
}

std::vector<Point> keypoint_sites(const RoadGraph& gt) {
  std::set<std::pair<double, double>> seen;
  std::vector<Point> sites;
  auto add = [&](Point p) {
    const Point q{std::round(p.x), std::round(p.y)};
    if (seen.insert({q.y, q.x}).second) sites.push_back(q);
  };
  for (const Node& n : gt.nodes())
    if (n.degree != 2 && n.degree > 0) add(n.point());
  auto place_along = [&](std::span<const Point> line) {
    std::vector<double> cum(line.size(), 0.0);
    for (std::size_t i = 1; i < line.size(); ++i) cum[i] = cum[i - 1] + distance(line[i - 1], line[i]);
    const long q = std::max(0L, static_cast<long>(std::ceil(cum.back() / kKeypointInterval - 1e-9)) - 1);
    std::size_t seg = 0;
    for (long k = 1; k <= q; ++k) {
      const double target = cum.back() * static_cast<double>(k) / static_cast<double>(q + 1);
      while (seg + 2 < line.size() && cum[seg + 1] < target) ++seg;
      const double seg_len = cum[seg + 1] - cum[seg];
      const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
      add(line[seg] + (line[seg + 1] - line[seg]) * t);
    }
  };
  const double min_cos = std::cos(kCornerAngle * std::numbers::pi / 180.0);
  const SimplifiedGraph chains = simplify_graph(gt);
  for (std::size_t e = 0; e < chains.edges().size(); ++e) {
    const auto line = chains.polyline(static_cast<int>(e));
    // Sharp turns inside a chain are sites too, and split the even spacing.
    std::size_t start = 0;
    for (std::size_t i = 1; i + 1 < line.size(); ++i) {
      const Point in = line[i] - line[i - 1], out = line[i + 1] - line[i];
      const double denom = norm(in) * norm(out);
      if (denom > 0.0 && dot(in, out) / denom < min_cos) {
        add(line[i]);
        place_along(std::span<const Point>(line).subspan(start, i - start + 1));
        start = i;
      }
    }
    place_along(std::span<const Point>(line).subspan(start));
  }
  return sites;
}

std::pair<ProbabilityMask, ProbabilityMask> render_masks(const RoadGraph& gt, const SceneSpec& spec) {
  const int h = gt.height() > 0 ? gt.height() : spec.extent;
  const int w = gt.width() > 0 ? gt.width() : spec.extent;
  std::vector<float> road(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0.0f);
  const double reach = spec.road_width / 2.0 + kRoadFalloff;
  for (const Edge& e : gt.edges()) {
    const Point a = gt.point(e.u), b = gt.point(e.v);
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
    const int c1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
    const int r1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = project_onto_segment(Point{static_cast<double>(c), static_cast<double>(r)}, a, b).distance;
        const auto v = static_cast<float>(road_profile(d, spec.road_width));
        float& cell = road[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)];
        cell = std::max(cell, v);
      }
    }
  }

  std::vector<float> kp(road.size(), 0.0f);
  const int kreach = static_cast<int>(std::ceil(4.0 * kKeypointSigma));
  for (const Point& p : keypoint_sites(gt)) {
    const int pr = static_cast<int>(p.y), pc = static_cast<int>(p.x);
    for (int r = std::max(0, pr - kreach); r <= std::min(h - 1, pr + kreach); ++r) {
      for (int c = std::max(0, pc - kreach); c <= std::min(w - 1, pc + kreach); ++c) {
        const double d2 = (r - pr) * (r - pr) + (c - pc) * (c - pc);
        if (d2 > kreach * kreach) continue;
        const auto v = static_cast<float>(std::exp(-d2 / (2.0 * kKeypointSigma * kKeypointSigma)));
        float& cell = kp[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)];
        cell = std::max(cell, v);
      }
    }
  }
  return {ProbabilityMask(h, w, std::move(road)), ProbabilityMask(h, w, std::move(kp))};
}

// ---------------------------------------------------------------------------
// Corruption

DisplacementField::DisplacementField(double max_displacement, std::uint64_t seed)
    : max_(max_displacement) {
  Rng rng(seed);
  for (auto& axis : waves_) {
    double total = 0.0;
    for (int k = 0; k < 8; ++k) {
      const double wavelength = rng.uniform(64.0, 256.0);
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double freq = 2.0 * std::numbers::pi / wavelength;
      Wave w{rng.uniform(0.2, 1.0), freq * std::cos(theta), freq * std::sin(theta),
             rng.uniform(0.0, 2.0 * std::numbers::pi)};
      total += w.amplitude;
      axis.push_back(w);
    }
    // Each axis is bounded by max / sqrt(2), so the vector norm is bounded by max.
    for (auto& w : axis) w.amplitude *= max_ / (std::numbers::sqrt2 * total);
  }
}

DisplacementField::DisplacementField(double max_displacement, std::uint64_t seed, Extent grid)
    : DisplacementField(max_displacement, seed) {
  double peak = 0.0;
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c)
      peak = std::max(peak, norm(at(Point{static_cast<double>(c), static_cast<double>(r)})));
  if (peak <= 0.0) return;
  const double scale = max_ / peak;
  for (auto& axis : waves_)
    for (auto& w : axis) w.amplitude *= scale;
}

Point DisplacementField::at(Point p) const {
  double d[2] = {0.0, 0.0};
  for (int axis = 0; axis < 2; ++axis)
    for (const Wave& w : waves_[static_cast<std::size_t>(axis)])
      d[axis] += w.amplitude * std::sin(w.fx * p.x + w.fy * p.y + w.phase);
  return {d[0], d[1]};
}

bool Ellipse::contains(Point p) const {
  const Point d = p - center;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = c * d.x + s * d.y, v = -s * d.x + c * d.y;
  return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
}

double Ellipse::outside_distance(Point p) const {
  if (contains(p)) return 0.0;
  constexpr int kSides = 128;
  const double c = std::cos(angle), s = std::sin(angle);
  auto boundary = [&](int k) {
    const double t = 2.0 * std::numbers::pi * k / kSides;
    const double u = a * std::cos(t), v = b * std::sin(t);
    return center + Point{c * u - s * v, s * u + c * v};
  };
  double best = std::numeric_limits<double>::infinity();
  Point prev = boundary(0);
  for (int k = 1; k <= kSides; ++k) {
    const Point cur = boundary(k);
    best = std::min(best, project_onto_segment(p, prev, cur).distance);
    prev = cur;
  }
  return best;
}

double occlusion_factor(const std::vector<Ellipse>& ellipses, Point p) {
  constexpr double kSoftEdge = 2.0;
  double factor = 1.0;
  for (const Ellipse& e : ellipses) {
    const double reach = std::max(e.a, e.b) + kSoftEdge;
    if (distance_sq(p, e.center) > reach * reach) continue;
    const double d = e.outside_distance(p);
    if (d >= kSoftEdge) continue;
    factor = std::min(factor, 0.5 * (1.0 - std::cos(std::numbers::pi * d / kSoftEdge)));
  }
  return factor;
}

ProbabilityMask warp_mask(const ProbabilityMask& mask, const DisplacementField& field) {
  std::vector<float> out;
  out.reserve(mask.values().size());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      const Point p{static_cast<double>(c), static_cast<double>(r)};
      const Point q = p + field.at(p);
      // Inline clamped bilinear read to avoid a dependency cycle on mask_ops.
      const double x = std::clamp(q.x, 0.0, mask.width() - 1.0);
      const double y = std::clamp(q.y, 0.0, mask.height() - 1.0);
      const int c0 = static_cast<int>(std::floor(x)), r0 = static_cast<int>(std::floor(y));
      const int c1 = std::min(c0 + 1, mask.width() - 1), r1 = std::min(r0 + 1, mask.height() - 1);
      const double fx = x - c0, fy = y - r0;
      const double top = (1.0 - fx) * mask.at(r0, c0) + fx * mask.at(r0, c1);
      const double bottom = (1.0 - fx) * mask.at(r1, c0) + fx * mask.at(r1, c1);
      out.push_back(std::clamp(static_cast<float>((1.0 - fy) * top + fy * bottom), 0.0f, 1.0f));
    }
  }
  return ProbabilityMask(mask.height(), mask.width(), std::move(out));
}

ProbabilityMask blur_mask(const ProbabilityMask& mask, double radius) {
  if (radius <= 0.0) return mask;
  const int half = static_cast<int>(std::ceil(radius));
  const double sigma = radius / 2.0;
  std::vector<double> kernel;
  double sum = 0.0;
  for (int k = -half; k <= half; ++k) {
    kernel.push_back(std::exp(-(k * k) / (2.0 * sigma * sigma)));
    sum += kernel.back();
  }
  for (double& k : kernel) k /= sum;
  const int h = mask.height(), w = mask.width();
  std::vector<double> tmp(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k)
        acc += kernel[static_cast<std::size_t>(k + half)] * mask.at(r, std::clamp(c + k, 0, w - 1));
      tmp[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)] = acc;
    }
  }
  std::vector<float> out(tmp.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k)
        acc += kernel[static_cast<std::size_t>(k + half)] *
               tmp[static_cast<std::size_t>(std::clamp(r + k, 0, h - 1)) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)] =
          std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
    }
  }
  return ProbabilityMask(h, w, std::move(out));
}

namespace {

std::vector<Ellipse> place_occluders(const RoadGraph& gt, const CorruptionSpec& cspec, int h, int w,
                                     Rng& rng) {
  std::vector<Ellipse> out;
  const double total = gt.total_length();
  for (int k = 0; k < cspec.occlusions; ++k) {
    Point center{rng.uniform(0.0, w - 1.0), rng.uniform(0.0, h - 1.0)};
    if (total > 0.0) {
      double target = rng.uniform(0.0, total);
      for (std::size_t e = 0; e < gt.edge_count(); ++e) {
        const double len = gt.edge_length(static_cast<int>(e));
        if (target <= len || e + 1 == gt.edge_count()) {
          const Point a = gt.point(gt.edges()[e].u), b = gt.point(gt.edges()[e].v);
          center = a + (b - a) * (len > 0.0 ? std::min(1.0, target / len) : 0.0);
          break;
        }
        target -= len;
      }
    }
    Ellipse el;
    el.center = center;
    el.a = rng.uniform(cspec.occlusion_min, cspec.occlusion_max);
    el.b = rng.uniform(cspec.occlusion_min, cspec.occlusion_max);
    el.angle = rng.uniform(0.0, std::numbers::pi);
    out.push_back(el);
  }
  return out;
}

ProbabilityMask occlude(const ProbabilityMask& mask, const std::vector<Ellipse>& ellipses) {
  std::vector<float> out(mask.values().begin(), mask.values().end());
  for (const Ellipse& e : ellipses) {
    const double reach = std::max(e.a, e.b) + 2.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(e.center.y - reach)));
    const int r1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(e.center.y + reach)));
    const int c0 = std::max(0, static_cast<int>(std::floor(e.center.x - reach)));
    const int c1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(e.center.x + reach)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double f = occlusion_factor({e}, Point{static_cast<double>(c), static_cast<double>(r)});
        float& v = out[static_cast<std::size_t>(r) * static_cast<std::size_t>(mask.width()) + static_cast<std::size_t>(c)];
        v = static_cast<float>(v * f);
      }
    }
  }
  return ProbabilityMask(mask.height(), mask.width(), std::move(out));
}

ProbabilityMask add_noise(const ProbabilityMask& mask, double sigma, Rng& rng) {
  std::vector<float> out;
  out.reserve(mask.values().size());
  for (float v : mask.values())
    out.push_back(std::clamp(static_cast<float>(v + sigma * rng.normal()), 0.0f, 1.0f));
  return ProbabilityMask(mask.height(), mask.width(), std::move(out));
}

}  // namespace

CorruptedRasters corrupt(const RoadGraph& gt, const ProbabilityMask& road,
                         const ProbabilityMask& keypoint, const CorruptionSpec& cspec,
                         std::uint64_t seed) {
  cspec.validate();
  CorruptedRasters out{road, keypoint, {}, {}};
  const int h = road.height(), w = road.width();
  if (cspec.warp > 0.0) {
    const DisplacementField field(cspec.warp, derive_seed(seed, 11), Extent{w, h});
    out.road = warp_mask(out.road, field);
    out.keypoint = warp_mask(out.keypoint, field);
  }
  if (cspec.occlusions > 0) {
    Rng rng(derive_seed(seed, 12));
    out.occluders = place_occluders(gt, cspec, h, w, rng);
    out.road = occlude(out.road, out.occluders);
    out.keypoint = occlude(out.keypoint, out.occluders);
  }
  if (cspec.blur > 0.0) {
    out.road = blur_mask(out.road, cspec.blur);
    out.keypoint = blur_mask(out.keypoint, cspec.blur);
  }
  if (cspec.noise > 0.0) {
    Rng rng(derive_seed(seed, 13));
    out.road = add_noise(out.road, cspec.noise, rng);
    out.keypoint = add_noise(out.keypoint, cspec.noise, rng);
  }

  const ProbabilityMask context = blur_mask(out.road, 4.0);
  Rng noise(derive_seed(seed, 14));
  std::vector<float> feats;
  feats.reserve(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * kSurrogateChannels);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      feats.push_back(out.road.at(r, c));
      feats.push_back(out.keypoint.at(r, c));
      feats.push_back(context.at(r, c));
      feats.push_back(static_cast<float>(static_cast<double>(c) / w));
      feats.push_back(static_cast<float>(static_cast<double>(r) / h));
      feats.push_back(static_cast<float>(noise.uniform()));
    }
  }
  out.features = FeatureMap(h, w, kSurrogateChannels, std::move(feats));
  return out;
}

SyntheticScene make_scene(const SceneSpec& spec, const CorruptionSpec& cspec) {
  SyntheticScene scene;
  scene.spec = spec;
  scene.corruption = cspec;
  scene.gt = generate_graph(spec);
  auto [road, kp] = render_masks(scene.gt, spec);
  scene.clean_road = std::move(road);
  scene.clean_keypoint = std::move(kp);
  auto c = corrupt(scene.gt, scene.clean_road, scene.clean_keypoint, cspec, derive_seed(spec.seed, 7));
  scene.road = std::move(c.road);
  scene.keypoint = std::move(c.keypoint);
  scene.features = std::move(c.features);
  return scene;
}

// ---------------------------------------------------------------------------
// Benchmarks

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::TestIn: return "test-in";
    case Split::TestOut: return "test-out";
  }
  return "unknown";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test-in") return Split::TestIn;
  if (name == "test-out") return Split::TestOut;
  throw std::invalid_argument("unknown split '" + name + "'");
}

std::vector<const ManifestEntry*> Manifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : scenes)
    if (e.split == s) out.push_back(&e);
  return out;
}

Manifest make_benchmark(const BenchmarkCounts& counts, const BenchmarkSpec& spec, std::uint64_t seed) {
  const std::array<std::pair<Split, int>, 4> plan{{{Split::Train, counts.train},
                                                    {Split::Val, counts.val},
                                                    {Split::TestIn, counts.test_in},
                                                    {Split::TestOut, counts.test_out}}};
  for (const auto& [split, n] : plan) {
    if (n < 1) throw std::invalid_argument("benchmark split '" + to_string(split) + "' needs at least one scene");
    if (static_cast<std::uint64_t>(n) > kSplitSeedStride)
      throw std::invalid_argument("benchmark split '" + to_string(split) + "' overlaps the next seed range");
  }
  if (spec.train_styles.empty()) throw std::invalid_argument("benchmark needs at least one training style");
  if (std::find(spec.train_styles.begin(), spec.train_styles.end(), spec.test_out_style) !=
      spec.train_styles.end())
    throw std::invalid_argument("test-out style must be disjoint from the training styles");
  spec.corruption.validate();
  spec.test_out_corruption.validate();

  Manifest m;
  m.seed = seed;
  m.benchmark = spec;
  const std::uint64_t base = seed * 4 * kSplitSeedStride;
  for (std::size_t s = 0; s < plan.size(); ++s) {
    const auto [split, n] = plan[s];
    for (int i = 0; i < n; ++i) {
      ManifestEntry e;
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04d", to_string(split).c_str(), i);
      e.name = name;
      e.split = split;
      e.spec = spec.base;
      e.spec.seed = base + s * kSplitSeedStride + static_cast<std::uint64_t>(i);
      if (split == Split::TestOut) {
        e.spec.style = spec.test_out_style;
        e.corruption = spec.test_out_corruption;
      } else {
        e.spec.style = spec.train_styles[static_cast<std::size_t>(i) % spec.train_styles.size()];
        e.corruption = spec.corruption;
      }
      e.spec.validate();
      m.scenes.push_back(e);
    }
  }
  return m;
}

}  // namespace roadgraph
