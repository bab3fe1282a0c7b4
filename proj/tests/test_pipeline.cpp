#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "roadgraph/metrics.hpp"
#include "roadgraph/pipeline.hpp"
#include "roadgraph/threading.hpp"

using namespace roadgraph;

namespace {

InferenceBundle blank_bundle(int h, int w, int c = kSurrogateChannels) {
  return {ProbabilityMask(h, w), ProbabilityMask(h, w), FeatureMap(h, w, c)};
}

TrainingConfig quick_training(int epochs = 8) {
  TrainingConfig cfg;
  cfg.epochs = epochs;
  cfg.hidden = {32, 32};
  return cfg;
}

// Shared across cases: four clean training scenes and a classifier trained on them.
const std::vector<Scene>& train_scenes() {
  static const std::vector<Scene> scenes = [] {
    std::vector<Scene> out;
    for (std::uint64_t s = 0; s < 4; ++s) out.push_back(oracle::as_scene(oracle::small_scene(s), "t" + std::to_string(s)));
    return out;
  }();
  return scenes;
}

const TrainingResult& trained() {
  static const TrainingResult result = run_training(train_scenes(), TrainingConfig{}, 1);
  return result;
}

}  // namespace

TEST_CASE("plan_patches") {
  const PatchPlan p = plan_patches(1000, 700, 512);
  CHECK(p.stride == 384);
  for (const auto& w : p.windows) {
    CHECK(w.row + w.height <= 1000);
    CHECK(w.col + w.width <= 700);
    CHECK(w.height == 512);
  }
  // Every pixel is covered.
  for (int r = 0; r < 1000; r += 7)
    for (int c = 0; c < 700; c += 7) {
      bool hit = false;
      for (const auto& w : p.windows) hit = hit || w.contains({double(c), double(r)});
      CHECK(hit);
    }
  CHECK(p.windows.back().row == 1000 - 512);
  CHECK(p.windows.back().col == 700 - 512);

  const PatchPlan small = plan_patches(100, 80, 512);
  REQUIRE(small.windows.size() == 1);
  CHECK(small.windows[0].height == 100);
  CHECK(small.windows[0].width == 80);
  CHECK_THROWS_AS(plan_patches(100, 100, 64, 65), std::invalid_argument);
}

TEST_CASE("blend_bundle reproduces the scene rasters in any window order") {
  const Scene scene = oracle::as_scene(oracle::small_scene(4, 256));
  PatchPlan plan = plan_patches(256, 256, 96, 40);
  const InferenceBundle a = blend_bundle(scene, plan);
  CHECK(a.road == scene.road);
  CHECK(a.keypoint == scene.keypoint);
  CHECK(a.features == scene.features);
  std::reverse(plan.windows.begin(), plan.windows.end());
  const InferenceBundle b = blend_bundle(scene, plan);
  CHECK(b.road == a.road);
  InferenceConfig icfg;
  CHECK(extract_nodes(a, icfg.thresholds, icfg) == extract_nodes(b, icfg.thresholds, icfg));
}

TEST_CASE("extract_nodes") {
  InferenceConfig cfg;
  const ThresholdSet t;
  CHECK(extract_nodes(blank_bundle(32, 32), t, cfg).empty());

  InferenceBundle disjoint = blank_bundle(64, 64);
  disjoint.road.set(5, 5, 0.9f);
  disjoint.keypoint.set(50, 50, 0.9f);
  const auto two = extract_nodes(disjoint, t, cfg);
  REQUIRE(two.size() == 2);
  CHECK(two[0].origin == NodeOrigin::KeypointMask);
  CHECK(two[1].origin == NodeOrigin::RoadMask);

  InferenceBundle same = blank_bundle(64, 64);
  same.road.set(20, 20, 0.9f);
  same.keypoint.set(20, 20, 0.7f);
  const auto one = extract_nodes(same, t, cfg);
  REQUIRE(one.size() == 1);
  CHECK(one[0].origin == NodeOrigin::KeypointMask);
  CHECK(one[0].point == Point{20, 20});

  // Merge-rule oracle: a road peak survives iff it is at least merge_distance from all keypoint peaks.
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    InferenceBundle b = blank_bundle(48, 48);
    b.road = oracle::random_mask(48, 48, rng);
    b.keypoint = oracle::random_mask(48, 48, rng);
    cfg.merge_distance = rng.uniform(0, 12);
    const ThresholdSet th{rng.uniform(0.7, 0.99), rng.uniform(0.7, 0.99), 0.5};
    const auto kp = oracle::nms(b.keypoint, th.t2, cfg.r2);
    const auto rd = oracle::nms(b.road, th.t1, cfg.r1);
    std::vector<ExtractedNode> want;
    for (const auto& p : kp) want.push_back({p.point, p.value, NodeOrigin::KeypointMask});
    for (const auto& p : rd) {
      bool blocked = false;
      for (const auto& q : kp) blocked = blocked || distance(p.point, q.point) < cfg.merge_distance;
      if (!blocked) want.push_back({p.point, p.value, NodeOrigin::RoadMask});
    }
    CHECK(extract_nodes(b, th, cfg) == want);
  }
}

TEST_CASE("score_pairs") {
  FeatureLayout layout;
  const InferenceBundle bundle = blank_bundle(64, 64);
  const Classifier zero({layout.size(), 4, 1});
  const std::vector<ExtractedNode> single{{{10, 10}, 1.0f, NodeOrigin::RoadMask}};
  CHECK(score_pairs(single, bundle, zero, layout, 16).empty());

  const std::vector<ExtractedNode> pair{{{10, 10}, 1.0f, NodeOrigin::RoadMask}, {{20, 10}, 1.0f, NodeOrigin::RoadMask}};
  const auto c = score_pairs(pair, bundle, zero, layout, 16);
  REQUIRE(c.size() == 1);
  CHECK(c[0].scores.size() == 2);
  CHECK(c[0].a == 0);
  CHECK(c[0].b == 1);
  CHECK(c[0].fused == 0.5);
  CHECK(score_pairs(pair, bundle, zero, layout, 9).empty());

  SUBCASE("direction-blind classifier gives equal scores") {
    // Identical weights on the source and target blocks, no line features.
    FeatureLayout off = layout;
    off.line = LineMode::Off;
    Classifier sym({off.size(), 1});
    Rng rng(3);
    for (int k = 0; k < off.node_width(); ++k) {
      const double w = rng.uniform(-1, 1);
      sym.parameters()[std::size_t(k)] = w;
      sym.parameters()[std::size_t(k + off.node_width())] = w;
    }
    const Scene scene = oracle::as_scene(oracle::small_scene(2));
    const InferenceBundle real{scene.road, scene.keypoint, scene.features};
    const auto nodes = extract_nodes(real, ThresholdSet{}, InferenceConfig{});
    const auto cands = score_pairs(nodes, real, sym, off, 34);
    REQUIRE(!cands.empty());
    for (const auto& e : cands) {
      CHECK(e.scores[0] == doctest::Approx(e.scores[1]).epsilon(1e-12));
      CHECK(e.fused == doctest::Approx(e.scores[0]).epsilon(1e-12));
    }
  }
  SUBCASE("every in-radius pair appears once, sorted by fused score") {
    const Scene scene = oracle::as_scene(oracle::small_scene(5));
    const InferenceBundle real{scene.road, scene.keypoint, scene.features};
    const auto nodes = extract_nodes(real, ThresholdSet{}, InferenceConfig{});
    const auto cands = score_pairs(nodes, real, trained().classifier, layout, 34);
    std::set<std::pair<int, int>> got;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      CHECK(cands[i].a < cands[i].b);
      CHECK(cands[i].fused == doctest::Approx((cands[i].scores[0] + cands[i].scores[1]) / 2).epsilon(1e-15));
      if (i > 0) CHECK(cands[i - 1].fused >= cands[i].fused);
      got.insert({cands[i].a, cands[i].b});
    }
    std::set<std::pair<int, int>> want;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = i + 1; j < nodes.size(); ++j)
        if (distance(nodes[i].point, nodes[j].point) <= 34) want.insert({int(i), int(j)});
    CHECK(got == want);
  }
  CHECK_THROWS_AS(score_pairs(pair, bundle, Classifier({3, 1}), layout, 16), std::invalid_argument);
}

TEST_CASE("emit_graph") {
  std::vector<ExtractedNode> nodes;
  for (int i = 0; i < 6; ++i) nodes.push_back({{10.0 + 8 * i, 10.0 + (i % 2) * 5}, 1.0f, NodeOrigin::RoadMask});
  std::vector<EdgeCandidate> all;
  for (int a = 0; a < 6; ++a)
    for (int b = a + 1; b < 6; ++b)
      if (distance(nodes[a].point, nodes[b].point) <= 20) all.push_back({a, b, {0.1, 0.1}, 0.1});
  const Extent ext{128, 128};
  CHECK(emit_graph(nodes, all, 0.5, ext).empty());
  CHECK(emit_graph(nodes, all, 0.5, ext, false).edge_count() == 0);
  for (auto& c : all) c.fused = 0.9;
  const RoadGraph full = emit_graph(nodes, all, 0.5, ext);
  CHECK(full.edge_count() == all.size());
  CHECK(full.vertex_count() == 6);

  auto key = [](Point p, Point q) {
    auto a = std::pair{p.x, p.y}, b = std::pair{q.x, q.y};
    return a < b ? std::pair{a, b} : std::pair{b, a};
  };
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const double t3 = rng.uniform(0.2, 0.8);
    std::set<decltype(key(Point{}, Point{}))> want, got;
    for (auto& c : all) {
      c.fused = std::floor(rng.uniform() * 20) / 20;  // lands on t3 exactly now and then
      if (c.fused >= t3) want.insert(key(nodes[c.a].point, nodes[c.b].point));
    }
    const RoadGraph g = emit_graph(nodes, all, t3, ext);
    for (const Edge& e : g.edges()) got.insert(key(g.point(e.u), g.point(e.v)));
    CHECK(got == want);
    for (const Node& n : g.nodes()) CHECK(n.degree > 0);
  }
}

TEST_CASE("run_training") {
  const auto& scenes = train_scenes();
  SUBCASE("one scene, one epoch") {
    const TrainingResult r = run_training(std::span(scenes).first(1), quick_training(1), 0);
    CHECK(r.epoch_losses.size() == 1);
    CHECK(std::isfinite(r.epoch_losses[0]));
    CHECK(r.samples_last_epoch > 0);
    const Classifier init = Classifier::initialized(quick_training().layer_sizes(), derive_seed(0, 0xC1A5));
    CHECK_FALSE(r.classifier == init);
    CHECK(r.state.step > 0);
  }
  SUBCASE("same seed gives identical results") {
    const auto a = run_training(scenes, quick_training(2), 9);
    const auto b = run_training(scenes, quick_training(2), 9);
    CHECK(a.epoch_losses == b.epoch_losses);
    CHECK(a.classifier == b.classifier);
    CHECK(a.state == b.state);
    const auto c = run_training(scenes, quick_training(2), 10);
    CHECK_FALSE(c.classifier == a.classifier);
  }
  SUBCASE("resuming continues the same run") {
    const auto whole = run_training(scenes, quick_training(3), 4);
    const auto first = run_training(scenes, quick_training(2), 4);
    const auto rest = run_training(scenes, quick_training(1), 4, &first);
    CHECK(rest.epoch_losses == whole.epoch_losses);
    CHECK(rest.classifier == whole.classifier);
  }
  SUBCASE("loss falls over training") {
    const auto& r = trained();
    CHECK(r.epoch_losses.back() < r.epoch_losses.front());
  }
  SUBCASE("resampling flag controls target provenance") {
    TrainingConfig cfg = quick_training();
    const Scene warped = oracle::as_scene(oracle::small_scene(1, 256, CorruptionSpec{0, 5, 10, 5.0, 0, 0}));
    const PatchPlan plan = plan_patches(256, 256, cfg.patch_size);
    cfg.resample = false;
    Rng a(1);
    for (const auto& p : training_pairs(*warped.gt, warped.road, plan.windows[0], cfg, a)) {
      CHECK(p.provenance == Provenance::GroundTruthTarget);
      CHECK(warped.gt->point(int(nodes_within(*warped.gt, p.target, 0.0)[0].id)) == p.target);
    }
    cfg.resample = true;
    Rng b(1);
    for (const auto& p : training_pairs(*warped.gt, warped.road, plan.windows[0], cfg, b))
      CHECK(p.provenance == Provenance::ResampledTarget);
  }
  SUBCASE("errors") {
    Scene no_gt = scenes[0];
    no_gt.gt.reset();
    CHECK_THROWS_AS(run_training(std::span(&no_gt, 1), quick_training(1), 0), std::invalid_argument);
    Scene mismatched = scenes[0];
    mismatched.keypoint = ProbabilityMask(10, 10);
    CHECK_THROWS_AS(run_training(std::span(&mismatched, 1), quick_training(1), 0), std::invalid_argument);
    CHECK_THROWS_AS(run_training(std::span<const Scene>(), quick_training(1), 0), std::invalid_argument);
  }
}

TEST_CASE("run_inference") {
  const FeatureLayout layout;
  InferenceConfig cfg;
  SUBCASE("blank scene gives an empty graph") {
    const Scene blank{"blank", std::nullopt, ProbabilityMask(128, 128), ProbabilityMask(128, 128),
                      FeatureMap(128, 128, kSurrogateChannels)};
    CHECK(run_inference(blank, trained().classifier, layout, cfg).graph.empty());
  }
  SUBCASE("clean scenes are recovered, deterministically") {
    const std::vector<Scene> val{oracle::as_scene(oracle::small_scene(98)), oracle::as_scene(oracle::small_scene(99))};
    cfg.thresholds =
        search_thresholds(val, trained().classifier, layout, cfg, TopoConfig{}, default_threshold_grid()).best;
    for (std::uint64_t s = 100; s < 103; ++s) {
      const Scene scene = oracle::as_scene(oracle::small_scene(s));
      const auto a = run_inference(scene, trained().classifier, layout, cfg);
      const auto b = run_inference(scene, trained().classifier, layout, cfg);
      CHECK(a.graph == b.graph);
      CHECK(a.diagnostics.emitted_edges == a.graph.edge_count());
      CHECK(a.diagnostics.keypoint_nodes + a.diagnostics.road_nodes > 0);
      const auto m = evaluate(*scene.gt, a.graph, TopoConfig{}, AplsConfig{});
      CHECK(m.topo.f1 >= 0.95);
      CHECK(m.apls.apls >= 0.90);
    }
  }
  SUBCASE("emitted edges are exactly the candidates at or above t3") {
    cfg.thresholds = {0.3, 0.3, 0.6};
    const Scene scene = oracle::as_scene(oracle::small_scene(7));
    const InferenceBundle bundle{scene.road, scene.keypoint, scene.features};
    const auto nodes = extract_nodes(bundle, cfg.thresholds, cfg);
    const auto cands = score_pairs(nodes, bundle, trained().classifier, layout, cfg.pair_radius);
    const RoadGraph g = run_inference(scene, trained().classifier, layout, cfg).graph;
    std::size_t above = 0;
    for (const auto& c : cands) {
      const bool kept = c.fused >= 0.6;
      above += kept;
      bool present = false;
      for (const Edge& e : g.edges()) {
        const Point p = g.point(e.u), q = g.point(e.v);
        const Point a = nodes[std::size_t(c.a)].point, b = nodes[std::size_t(c.b)].point;
        present = present || (p == a && q == b) || (p == b && q == a);
      }
      CHECK(present == kept);
    }
    CHECK(g.edge_count() == above);
  }
  SUBCASE("thread count does not change the result") {
    const Scene scene = oracle::as_scene(oracle::small_scene(8));
    const RoadGraph base = run_inference(scene, trained().classifier, layout, cfg).graph;
    setenv(kThreadsEnv, "1", 1);
    const RoadGraph one = run_inference(scene, trained().classifier, layout, cfg).graph;
    setenv(kThreadsEnv, "5", 1);
    const RoadGraph five = run_inference(scene, trained().classifier, layout, cfg).graph;
    unsetenv(kThreadsEnv);
    CHECK(one == base);
    CHECK(five == base);
  }
}

TEST_CASE("search_thresholds matches exhaustive evaluation") {
  std::vector<Scene> val;
  for (std::uint64_t s = 200; s < 202; ++s) val.push_back(oracle::as_scene(oracle::small_scene(s)));
  const FeatureLayout layout;
  const InferenceConfig icfg;
  const TopoConfig tcfg;
  const std::vector<double> grid{0.3, 0.6, 0.9};
  const auto got = search_thresholds(val, trained().classifier, layout, icfg, tcfg, grid);

  ThresholdSet best;
  double best_f1 = -1.0;
  for (double t1 : grid)
    for (double t2 : grid)
      for (double t3 : grid) {
        InferenceConfig c = icfg;
        c.thresholds = {t1, t2, t3};
        double sum = 0.0;
        for (const Scene& s : val) sum += topo(*s.gt, run_inference(s, trained().classifier, layout, c).graph, tcfg).f1;
        const double f1 = sum / double(val.size());
        if (f1 > best_f1) {  // strict: the first (smallest) triple wins ties
          best_f1 = f1;
          best = c.thresholds;
        }
      }
  CHECK(got.best == best);
  CHECK(got.f1 == doctest::Approx(best_f1).epsilon(1e-12));
  CHECK(got.evaluated >= 1);

  // A zero classifier scores every pair 0.5; with blank masks every triple
  // gives F1 0, so the smallest triple is chosen.
  Scene blank = val[0];
  blank.road = ProbabilityMask(blank.road.height(), blank.road.width());
  blank.keypoint = blank.road;
  const auto tie = search_thresholds(std::span(&blank, 1), Classifier({layout.size(), 1}), layout, icfg, tcfg,
                                     default_threshold_grid());
  CHECK(tie.best == ThresholdSet{0.05, 0.05, 0.05});
  CHECK(tie.f1 == 0.0);
  CHECK_THROWS_AS(search_thresholds(std::span<const Scene>(), trained().classifier, layout, icfg, tcfg, grid),
                  std::invalid_argument);
}
