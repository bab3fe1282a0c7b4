#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "roadgraph/sampling.hpp"

using namespace roadgraph;

namespace {

RoadGraph graph_of(std::vector<Point> pts, std::vector<Edge> es, Extent ext = {64, 64}) {
  return build_graph(pts, es, ext);
}

}  // namespace

TEST_CASE("sample_sources") {
  SamplerConfig cfg;
  Rng rng(1);
  const RoadGraph single = graph_of({{3, 3}}, {});
  const auto one = sample_sources(single, cfg, rng);
  REQUIRE(one.size() == 1);
  CHECK(one[0].id == 0);

  const RoadGraph g = oracle::random_graph(40, 60, {128, 128}, 2);
  const auto all = sample_sources(g, cfg, rng);
  std::set<int> ids;
  for (const Node& n : all) ids.insert(n.id);
  CHECK(ids.size() == 40);

  cfg.sources = 10;
  const auto some = sample_sources(g, cfg, rng);
  ids.clear();
  for (const Node& n : some) ids.insert(n.id);
  CHECK(ids.size() == 10);  // without replacement

  Rng a(77), b(77);
  CHECK(sample_sources(g, cfg, a) == sample_sources(g, cfg, b));
}

TEST_CASE("sample_sources favors rare degrees") {
  // 180 vertices on a cycle (degree 2) and five K4 blocks (degree 3).
  std::vector<Point> pts;
  std::vector<Edge> es;
  for (int i = 0; i < 180; ++i) {
    pts.push_back({double(i % 60), double(i / 60)});
    es.push_back({std::min(i, (i + 1) % 180), std::max(i, (i + 1) % 180)});
  }
  for (int k = 0; k < 5; ++k) {
    const int base = int(pts.size());
    for (int j = 0; j < 4; ++j) pts.push_back({double(10 * k + j), 50.0});
    for (int x = 0; x < 4; ++x)
      for (int y = x + 1; y < 4; ++y) es.push_back({base + x, base + y});
  }
  const RoadGraph g = graph_of(pts, es);
  SamplerConfig cfg;
  cfg.sources = 20;
  double fraction = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    int deg3 = 0;
    for (const Node& n : sample_sources(g, cfg, rng)) deg3 += n.degree == 3;
    fraction += deg3 / 20.0;
  }
  fraction /= 1000.0;
  CHECK(fraction > 0.1);
  CHECK(fraction > 0.3);  // inverse-frequency weights make both classes equally likely per draw
}

TEST_CASE("gather_targets examples") {
  SamplerConfig cfg;
  const RoadGraph iso = graph_of({{10, 10}, {20, 10}}, {});
  const auto neg = gather_targets(iso, iso.node(0), cfg);
  REQUIRE(neg.size() == 1);
  CHECK(neg[0].node.id == 1);
  CHECK_FALSE(neg[0].positive);

  const RoadGraph direct = graph_of({{10, 10}, {20, 10}}, {{0, 1}});
  const auto pos = gather_targets(direct, direct.node(0), cfg);
  REQUIRE(pos.size() == 1);
  CHECK(pos[0].positive);

  // Chain source - v - target with path length 14 and chord 12.
  const double y = std::sqrt(13.0);
  const RoadGraph chain = graph_of({{10, 10}, {16, 10 + y}, {22, 10}}, {{0, 1}, {1, 2}});
  cfg.positive_budget = 32.0;
  const auto c = gather_targets(chain, chain.node(0), cfg);
  REQUIRE(c.size() == 2);
  CHECK(c[1].node.id == 2);
  CHECK(c[1].positive);
  cfg.positive_budget = 13.0;
  CHECK_FALSE(gather_targets(chain, chain.node(0), cfg)[1].positive);

  // Closed ball: a node at exactly R is included.
  const RoadGraph edge = graph_of({{10, 10}, {26, 10}}, {});
  CHECK(gather_targets(edge, edge.node(0), SamplerConfig{}).size() == 1);
}

TEST_CASE("gather_targets matches a bounded Dijkstra oracle") {
  SamplerConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RoadGraph g = oracle::random_graph(60, 90, {96, 96}, 500 + seed);
    cfg.positive_budget = seed % 2 ? 16.0 : 32.0;
    for (int s = 0; s < 60; s += 6) {
      const auto dist = oracle::dijkstra(g, s);
      std::vector<std::pair<double, int>> want;
      for (const Node& n : g.nodes())
        if (n.id != s && distance(n.point(), g.point(s)) <= cfg.gather_radius)
          want.push_back({distance(n.point(), g.point(s)), n.id});
      std::sort(want.begin(), want.end());
      const auto got = gather_targets(g, g.node(s), cfg);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].node.id == want[i].second);
        CHECK(got[i].positive == (dist[std::size_t(want[i].second)] <= cfg.positive_budget));
      }
    }
  }
}

TEST_CASE("disk_argmax and resampling") {
  SamplerConfig cfg;
  ProbabilityMask m(32, 32, 0.1f);
  m.set(12, 9, 0.9f);
  CHECK(disk_argmax(m, {9, 12}, 8) == Point{9, 12});

  const ProbabilityMask flat(32, 32, 0.5f);
  CHECK(disk_argmax(flat, {10, 10}, 8) == Point{10, 2});

  ProbabilityMask shifted(32, 32, 0.1f);
  shifted.set(14, 13, 0.8f);  // (3, 4) away from the target: 5 px
  const std::vector<NodePairSample> pairs{{{2, 2}, {10, 10}, true, Provenance::GroundTruthTarget}};
  const auto moved = resample_targets(pairs, shifted, cfg);
  CHECK(moved[0].target == Point{13, 14});
  CHECK(moved[0].source == Point{2, 2});
  CHECK(*moved[0].label);
  CHECK(moved[0].provenance == Provenance::ResampledTarget);
}

TEST_CASE("resampling invariants on rendered scenes") {
  SamplerConfig cfg;
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.extent = 160;
    const RoadGraph gt = generate_graph(spec);
    const auto [road, kp] = render_masks(gt, spec);
    std::vector<NodePairSample> pairs;
    for (const Node& s : sample_sources(gt, cfg, rng))
      for (const auto& t : gather_targets(gt, s, cfg))
        pairs.push_back({s.point(), t.node.point(), t.positive, Provenance::GroundTruthTarget});
    REQUIRE(!pairs.empty());
    const auto moved = resample_targets(pairs, road, cfg);
    REQUIRE(moved.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(distance(moved[i].target, pairs[i].target) <= cfg.resample_radius);
      CHECK(moved[i].label == pairs[i].label);
      CHECK(moved[i].source == pairs[i].source);
      CHECK(sample_bilinear(road, moved[i].target) >= sample_bilinear(road, pairs[i].target) - 1e-12);
      // Brute-force disk argmax.
      const Point p = pairs[i].target;
      float best = -1.0f;
      Point at = p;
      for (int r = 0; r < road.height(); ++r)
        for (int c = 0; c < road.width(); ++c)
          if (std::hypot(c - p.x, r - p.y) <= cfg.resample_radius && road.at(r, c) > best) {
            best = road.at(r, c);
            at = {double(c), double(r)};
          }
      CHECK(moved[i].target == at);
    }
  }
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  cfg.resample_radius = 20;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.sources = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
