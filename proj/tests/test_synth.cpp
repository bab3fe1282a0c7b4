#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "roadgraph/synth.hpp"

using namespace roadgraph;

namespace {

SceneSpec random_spec(std::uint64_t seed) {
  Rng rng(seed);
  SceneSpec spec;
  spec.seed = seed;
  spec.extent = 128 + 64 * int(rng.below(5));
  spec.style = std::array{SceneStyle::UrbanGrid, SceneStyle::RuralCurves, SceneStyle::Mixed}[rng.below(3)];
  spec.junction_density = rng.uniform(50, 400);
  spec.jitter = rng.uniform(0, 8);
  spec.diagonal_probability = rng.uniform(0, 0.5);
  spec.node_spacing = rng.bernoulli(0.5) ? 0.0 : 12.0;
  return spec;
}

RoadGraph straight_road(int extent = 128) {
  return build_graph(std::vector<Point>{{20, 64}, {108, 64}}, std::vector<Edge>{{0, 1}}, {extent, extent});
}

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  return distance(p, a + ab * t);
}

std::pair<int, int> argmax(const ProbabilityMask& m) {
  std::pair<int, int> best{0, 0};
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m.at(r, c) > m.at(best.first, best.second)) best = {r, c};
  return best;
}

}  // namespace

TEST_CASE("generate_graph examples") {
  SceneSpec spec;
  spec.junction_density = 0;
  CHECK(generate_graph(spec).empty());

  // Zero jitter 4x4 lattice: 64 px spacing inside a 256 px scene with 16 px margins.
  spec = {};
  spec.junction_density = 1e6 / (64.0 * 64.0);
  spec.jitter = 0;
  spec.drop_probability = 0;
  spec.diagonal_probability = 0;
  spec.node_spacing = 0;
  const RoadGraph lattice = generate_graph(spec);
  CHECK(lattice.vertex_count() == 16);
  CHECK(lattice.edge_count() == 24);

  SceneSpec bad;
  bad.extent = 100;
  CHECK_THROWS_AS(generate_graph(bad), std::invalid_argument);
}

TEST_CASE("generated graphs are planar, deterministic and have few components") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const SceneSpec spec = random_spec(seed);
    const RoadGraph g = generate_graph(spec);
    REQUIRE(g.edge_count() > 0);
    const auto es = g.edges();
    for (std::size_t i = 0; i < es.size(); ++i)
      for (std::size_t j = i + 1; j < es.size(); ++j) {
        const bool crosses =
            oracle::segments_cross(g.point(es[i].u), g.point(es[i].v), g.point(es[j].u), g.point(es[j].v));
        if (crosses) FAIL_CHECK("edges " << i << " and " << j << " cross, seed " << seed);
      }
    const auto cc = connected_components(g);
    CHECK(*std::max_element(cc.begin(), cc.end()) < 3);
    CHECK(generate_graph(spec) == g);
  }
}

TEST_CASE("render_masks") {
  SceneSpec spec;
  spec.extent = 128;
  const auto [er, ek] = render_masks(build_graph(std::vector<Point>{}, std::vector<Edge>{}, {128, 128}), spec);
  CHECK(er == ProbabilityMask(128, 128));
  CHECK(ek == ProbabilityMask(128, 128));

  // Distance-transform oracle on a single horizontal edge.
  const RoadGraph line = straight_road();
  const auto [road, kp] = render_masks(line, spec);
  for (int r = 0; r < 128; ++r)
    for (int c = 0; c < 128; ++c) {
      const double d = segment_distance({double(c), double(r)}, {20, 64}, {108, 64});
      CHECK(road.at(r, c) == doctest::Approx(road_profile(d, spec.road_width)).epsilon(1e-6));
      if (d > spec.road_width / 2 + kRoadFalloff) CHECK(road.at(r, c) == 0.0f);
    }
  CHECK(road_profile(0, 4) == 1.0);
  CHECK(road_profile(2, 4) == 1.0);
  CHECK(road_profile(3, 4) == doctest::Approx(0.5));
  CHECK(road_profile(4, 4) == 0.0);

  // Endpoints are junctions (degree 1): keypoint peak 1 at their pixels.
  CHECK(kp.at(64, 20) == 1.0f);
  CHECK(kp.at(64, 108) == 1.0f);
  for (float v : kp.values()) CHECK(v <= 1.0f);
}

TEST_CASE("clean keypoint renders recover every junction") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec = random_spec(seed);
    const RoadGraph g = generate_graph(spec);
    const auto [road, kp] = render_masks(g, spec);
    const auto peaks = nms_extract(kp, {0.5, 8});
    for (const Node& n : g.nodes()) {
      if (n.degree == 2) continue;
      double best = 1e9;
      for (const auto& p : peaks) best = std::min(best, distance(p.point, n.point()));
      CHECK(best <= 1.0);
    }
  }
}

TEST_CASE("keypoint_sites") {
  const auto sites = keypoint_sites(straight_road());
  // 88 px in ceil(88/32) = 3 pieces plus both ends.
  REQUIRE(sites.size() == 4);
  std::vector<double> xs;
  for (const Point& p : sites) {
    CHECK(p.y == 64);
    xs.push_back(p.x);
  }
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] - xs[i - 1] <= 32.0 + 1.0);
}

TEST_CASE("corrupt") {
  SceneSpec spec;
  const RoadGraph g = generate_graph(spec);
  const auto [road, kp] = render_masks(g, spec);

  SUBCASE("zero spec is the identity") {
    const auto out = corrupt(g, road, kp, CorruptionSpec{}, 3);
    CHECK(out.road == road);
    CHECK(out.keypoint == kp);
    CHECK(out.occluders.empty());
    REQUIRE(out.features.channels() == kSurrogateChannels);
    for (int r = 0; r < road.height(); r += 11)
      for (int c = 0; c < road.width(); c += 13) {
        CHECK(out.features.at(r, c, 0) == road.at(r, c));
        CHECK(out.features.at(r, c, 1) == kp.at(r, c));
        CHECK(out.features.at(r, c, 3) == float(double(c) / road.width()));
        CHECK(out.features.at(r, c, 4) == float(double(r) / road.height()));
        CHECK(out.features.at(r, c, 5) >= 0.0f);
        CHECK(out.features.at(r, c, 5) < 1.0f);
      }
  }
  SUBCASE("occlusion on a straight road is local") {
    const RoadGraph line = straight_road();
    SceneSpec small;
    small.extent = 128;
    const auto [lr, lk] = render_masks(line, small);
    CorruptionSpec cs;
    cs.occlusions = 1;
    const auto out = corrupt(line, lr, lk, cs, 5);
    REQUIRE(out.occluders.size() == 1);
    const Ellipse& e = out.occluders[0];
    int inside = 0;
    for (int r = 0; r < 128; ++r)
      for (int c = 0; c < 128; ++c) {
        const Point p{double(c), double(r)};
        if (e.contains(p)) {
          CHECK(out.road.at(r, c) <= 1e-6f);
          ++inside;
        } else if (e.outside_distance(p) >= 3.0) {
          CHECK(out.road.at(r, c) == lr.at(r, c));
        }
      }
    CHECK(inside > 0);
  }
  SUBCASE("occlusion changes the warped masks only near ellipses") {
    CorruptionSpec warp_only;
    warp_only.warp = 4;
    CorruptionSpec both = warp_only;
    both.occlusions = 6;
    const auto a = corrupt(g, road, kp, warp_only, 9);
    const auto b = corrupt(g, road, kp, both, 9);
    REQUIRE(b.occluders.size() == 6);
    for (int r = 0; r < road.height(); ++r)
      for (int c = 0; c < road.width(); ++c)
        if (occlusion_factor(b.occluders, {double(c), double(r)}) == 1.0) {
          CHECK(a.road.at(r, c) == b.road.at(r, c));
          CHECK(a.keypoint.at(r, c) == b.keypoint.at(r, c));
        }
  }
  SUBCASE("masks stay in [0,1] under every corruption") {
    CorruptionSpec cs{8, 4, 12, 5, 0.2, 1.5};
    const auto out = corrupt(g, road, kp, cs, 2);
    for (float v : out.road.values()) CHECK((v >= 0.0f && v <= 1.0f));
    for (float v : out.keypoint.values()) CHECK((v >= 0.0f && v <= 1.0f));
    const auto again = corrupt(g, road, kp, cs, 2);
    CHECK(again.road == out.road);
    CHECK(again.features == out.features);
  }
  CHECK_THROWS_AS(corrupt(g, road, kp, CorruptionSpec{-1}, 0), std::invalid_argument);
}

TEST_CASE("warp displacement bound") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DisplacementField field(5.0, seed, Extent{256, 256});
    double largest = 0.0;
    for (int r = 0; r < 256; r += 3)
      for (int c = 0; c < 256; c += 3) {
        const Point d = field.at({double(c), double(r)});
        largest = std::max(largest, std::hypot(d.x, d.y));
      }
    CHECK(largest <= 5.0 + 1e-9);
    CHECK(largest > 3.0);
    const DisplacementField plain(5.0, seed);
    Rng rng(seed);
    for (int k = 0; k < 500; ++k) {
      const Point d = plain.at({rng.uniform(-500, 500), rng.uniform(-500, 500)});
      CHECK(std::hypot(d.x, d.y) <= 5.0 + 1e-9);
    }
  }
  // A single bump's argmax moves by at most the bound plus half a pixel diagonal.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Point centre{std::round(rng.uniform(40, 88)), std::round(rng.uniform(40, 88))};
    std::vector<float> v(128 * 128);
    for (int r = 0; r < 128; ++r)
      for (int c = 0; c < 128; ++c) {
        const double d2 = (c - centre.x) * (c - centre.x) + (r - centre.y) * (r - centre.y);
        v[std::size_t(r * 128 + c)] = float(std::exp(-d2 / (2 * kKeypointSigma * kKeypointSigma)));
      }
    const ProbabilityMask bump(128, 128, std::move(v));
    const auto warped = warp_mask(bump, DisplacementField(5.0, seed, Extent{128, 128}));
    const auto [r, c] = argmax(warped);
    CHECK(distance({double(c), double(r)}, centre) <= 5.0 + std::sqrt(0.5));
  }
}

TEST_CASE("make_scene is reproducible") {
  SceneSpec spec;
  spec.seed = 42;
  const CorruptionSpec cs{6, 5, 10, 5, 0.05, 1};
  const SyntheticScene a = make_scene(spec, cs), b = make_scene(spec, cs);
  CHECK(a.gt == b.gt);
  CHECK(a.road == b.road);
  CHECK(a.keypoint == b.keypoint);
  CHECK(a.features == b.features);
  CHECK(a.clean_road.height() == a.road.height());
  CHECK(a.features.width() == spec.extent);
}

TEST_CASE("make_benchmark") {
  BenchmarkSpec spec;
  const Manifest m = make_benchmark(BenchmarkCounts{4, 1, 2, 1}, spec, 7);
  CHECK(m.scenes.size() == 8);
  CHECK(m.split(Split::Train).size() == 4);
  CHECK(m.split(Split::Val).size() == 1);
  CHECK(m.split(Split::TestIn).size() == 2);
  CHECK(m.split(Split::TestOut).size() == 1);

  std::set<std::uint64_t> seeds;
  std::set<std::string> names;
  for (const auto& e : m.scenes) {
    seeds.insert(e.spec.seed);
    names.insert(e.name);
    const std::uint64_t range = e.spec.seed / kSplitSeedStride;
    CHECK(range % 4 == std::uint64_t(e.split));
  }
  CHECK(seeds.size() == 8);
  CHECK(names.size() == 8);
  for (const auto* e : m.split(Split::TestOut))
    CHECK(std::find(spec.train_styles.begin(), spec.train_styles.end(), e->spec.style) == spec.train_styles.end());

  const Manifest again = make_benchmark(BenchmarkCounts{4, 1, 2, 1}, spec, 7);
  REQUIRE(again.scenes.size() == m.scenes.size());
  for (std::size_t i = 0; i < m.scenes.size(); ++i) {
    CHECK(again.scenes[i].name == m.scenes[i].name);
    CHECK(again.scenes[i].spec.seed == m.scenes[i].spec.seed);
  }
  // Different benchmark seeds never share scene seeds.
  const Manifest other = make_benchmark(BenchmarkCounts{4, 1, 2, 1}, spec, 8);
  for (const auto& e : other.scenes) CHECK(seeds.count(e.spec.seed) == 0);

  CHECK_THROWS_AS(make_benchmark(BenchmarkCounts{0, 1, 1, 1}, spec, 0), std::invalid_argument);
  BenchmarkSpec clash = spec;
  clash.test_out_style = SceneStyle::UrbanGrid;
  CHECK_THROWS_AS(make_benchmark(BenchmarkCounts{}, clash, 0), std::invalid_argument);
}
