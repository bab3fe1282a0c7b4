#include "roadgraph/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "roadgraph/mask_ops.hpp"
#include "roadgraph/rng.hpp"
#include "roadgraph/threading.hpp"

namespace roadgraph {

namespace {

std::vector<int> axis_offsets(int size, int patch, int stride) {
  if (size <= patch) return {0};
  std::vector<int> out;
  for (int o = 0; o + patch < size; o += stride) out.push_back(o);
  out.push_back(size - patch);
  return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

void check_scene(const Scene& scene, bool need_gt) {
  const std::string label = scene.name.empty() ? std::string("scene") : "scene '" + scene.name + "'";
  if (need_gt && !scene.gt) throw std::invalid_argument(label + " has no ground-truth graph");
  InferenceBundle{scene.road, scene.keypoint, scene.features}.validate();
  if (scene.gt && !scene.gt->empty() &&
      (scene.gt->width() != scene.road.width() || scene.gt->height() != scene.road.height()))
    throw std::invalid_argument(label + ": ground-truth extent does not match the rasters");
}

}  // namespace

PatchPlan plan_patches(int height, int width, int patch_size, int stride) {
  if (height < 1 || width < 1) throw std::invalid_argument("patch plan: scene must be non-empty");
  if (patch_size < 1) throw std::invalid_argument("patch plan: patch size must be >= 1");
  if (stride == 0) stride = std::max(1, patch_size * 3 / 4);
  if (stride < 1 || stride > patch_size)
    throw std::invalid_argument("patch plan: stride must lie in [1, patch size]");
  PatchPlan plan{patch_size, stride, height, width, {}};
  for (int r : axis_offsets(height, patch_size, stride))
    for (int c : axis_offsets(width, patch_size, stride))
      plan.windows.push_back({r, c, std::min(patch_size, height), std::min(patch_size, width)});
  return plan;
}

void InferenceBundle::validate() const {
  if (road.empty() || keypoint.empty() || features.empty())
    throw std::invalid_argument("inference bundle: rasters must be non-empty");
  if (road.height() != keypoint.height() || road.width() != keypoint.width() ||
      road.height() != features.height() || road.width() != features.width())
    throw std::invalid_argument("inference bundle: road " + std::to_string(road.height()) + "x" +
                                std::to_string(road.width()) + ", keypoint " +
                                std::to_string(keypoint.height()) + "x" +
                                std::to_string(keypoint.width()) + ", features " +
                                std::to_string(features.height()) + "x" +
                                std::to_string(features.width()) + " disagree");
}

InferenceBundle blend_bundle(const Scene& scene, const PatchPlan& plan) {
  check_scene(scene, false);
  std::vector<MaskTile> road, keypoint;
  for (const PatchWindow& w : plan.windows) {
    road.push_back({crop(scene.road, w.row, w.col, w.height, w.width), w.row, w.col});
    keypoint.push_back({crop(scene.keypoint, w.row, w.col, w.height, w.width), w.row, w.col});
  }
  // Feature crops are identical wherever they overlap, so their mean is the map itself.
  return {blend_masks(road, plan.height, plan.width), blend_masks(keypoint, plan.height, plan.width),
          scene.features};
}

// ---------------------------------------------------------------------------
// Training

void TrainingConfig::validate() const {
  sampler.validate();
  layout.validate();
  if (patch_size < 1) throw std::invalid_argument("training: patch size must be >= 1");
  if (patch_stride < 0 || patch_stride > patch_size)
    throw std::invalid_argument("training: patch stride must lie in [0, patch size]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("training: learning rate must be positive");
  if (epochs < 0) throw std::invalid_argument("training: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("training: batch size must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("training: hidden layer widths must be >= 1");
}

std::vector<int> TrainingConfig::layer_sizes() const {
  std::vector<int> sizes{layout.size()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

std::vector<NodePairSample> training_pairs(const RoadGraph& gt, const ProbabilityMask& road,
                                           const PatchWindow& window, const TrainingConfig& cfg,
                                           Rng& rng) {
  std::vector<int> candidates;
  for (const Node& n : gt.nodes())
    if (window.contains(n.point())) candidates.push_back(n.id);
  std::vector<NodePairSample> pairs;
  for (const Node& source : sample_sources(gt, candidates, cfg.sampler, rng)) {
    for (const LabeledTarget& t : gather_targets(gt, source, cfg.sampler))
      pairs.push_back({source.point(), t.node.point(), t.positive, Provenance::GroundTruthTarget});
  }
  if (cfg.resample) pairs = resample_targets(pairs, road, cfg.sampler);
  return pairs;
}

TrainingResult run_training(std::span<const Scene> scenes, const TrainingConfig& cfg,
                            std::uint64_t seed, const TrainingResult* resume) {
  cfg.validate();
  if (scenes.empty()) throw std::invalid_argument("training needs at least one scene");
  for (const Scene& s : scenes) check_scene(s, true);
  for (const Scene& s : scenes)
    if (s.features.channels() != cfg.layout.channels)
      throw std::invalid_argument("scene '" + s.name + "' has " + std::to_string(s.features.channels()) +
                                  " feature channels, config expects " +
                                  std::to_string(cfg.layout.channels));

  TrainingResult result;
  if (resume != nullptr) {
    if (resume->classifier.layer_sizes() != cfg.layer_sizes())
      throw std::invalid_argument("resumed classifier shape does not match the configuration");
    result = *resume;
  } else {
    result.classifier = Classifier::initialized(cfg.layer_sizes(), derive_seed(seed, 0xC1A5));
    result.state = TrainState::for_model(result.classifier, cfg.learning_rate, seed);
  }

  const auto width = static_cast<std::size_t>(cfg.layout.size());
  const std::uint64_t pair_stream = derive_seed(seed, 0x7EA1);
  const std::uint64_t shuffle_stream = derive_seed(seed, 0x5F1E);
  const std::size_t first_epoch = result.epoch_losses.size();
  for (std::size_t epoch = first_epoch; epoch < first_epoch + static_cast<std::size_t>(cfg.epochs); ++epoch) {
    std::vector<double> features;
    std::vector<double> labels;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const Scene& scene = scenes[s];
      const PatchPlan plan = plan_patches(scene.road.height(), scene.road.width(), cfg.patch_size,
                                          cfg.patch_stride);
      for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        Rng rng(derive_seed(derive_seed(pair_stream, epoch), (s << 20) + w));
        const auto pairs = training_pairs(*scene.gt, scene.road, plan.windows[w], cfg, rng);
        const std::size_t base = labels.size();
        features.resize((base + pairs.size()) * width);
        for (const auto& p : pairs) labels.push_back(*p.label ? 1.0 : 0.0);
        parallel_for(pairs.size(), [&](std::size_t i) {
          assemble_features_into(scene.features, scene.road, pairs[i].source, pairs[i].target,
                                 cfg.layout,
                                 std::span<double>(features).subspan((base + i) * width, width));
        });
      }
    }
    if (labels.empty()) throw std::runtime_error("training produced no node pairs");

    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(shuffle_stream, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Batch batch;
      for (std::size_t k = start; k < end; ++k)
        batch.push(std::span<const double>(features).subspan(order[k] * width, width), labels[order[k]]);
      total += backward_and_step(result.classifier, result.state, batch) * static_cast<double>(end - start);
    }
    result.epoch_losses.push_back(total / static_cast<double>(labels.size()));
    result.samples_last_epoch = labels.size();
    result.positives_last_epoch =
        static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1.0));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

void InferenceConfig::validate() const {
  if (patch_size < 1) throw std::invalid_argument("inference: patch size must be >= 1");
  if (patch_stride < 0 || patch_stride > patch_size)
    throw std::invalid_argument("inference: patch stride must lie in [0, patch size]");
  if (!(r1 >= 0.0 && r2 >= 0.0)) throw std::invalid_argument("inference: NMS radii must be >= 0");
  if (!(merge_distance >= 0.0)) throw std::invalid_argument("inference: merge distance must be >= 0");
  if (!(pair_radius > 0.0)) throw std::invalid_argument("inference: pair radius must be positive");
  thresholds.validate();
}

namespace {

/// For each road peak, the smallest keypoint-peak index closer than `merge`,
/// or the keypoint count if none.
std::vector<std::size_t> merge_blockers(std::span<const Peak> keypoints, std::span<const Peak> road,
                                        double merge) {
  std::vector<Point> kp_points;
  for (const Peak& p : keypoints) kp_points.push_back(p.point);
  const SpatialIndex index(kp_points, std::max(merge, 1.0));
  std::vector<std::size_t> out(road.size(), keypoints.size());
  if (merge <= 0.0) return out;
  for (std::size_t k = 0; k < road.size(); ++k) {
    for (int j : index.query(road[k].point, merge)) {
      if (distance(road[k].point, kp_points[static_cast<std::size_t>(j)]) < merge)
        out[k] = std::min(out[k], static_cast<std::size_t>(j));
    }
  }
  return out;
}

std::vector<ExtractedNode> merge_nodes(std::span<const Peak> keypoints, std::span<const Peak> road,
                                       std::span<const std::size_t> blockers) {
  std::vector<ExtractedNode> out;
  for (const Peak& p : keypoints) out.push_back({p.point, p.value, NodeOrigin::KeypointMask});
  for (std::size_t k = 0; k < road.size(); ++k)
    if (blockers[k] >= keypoints.size()) out.push_back({road[k].point, road[k].value, NodeOrigin::RoadMask});
  return out;
}

}  // namespace

std::vector<ExtractedNode> extract_nodes(const InferenceBundle& bundle, const ThresholdSet& thresholds,
                                         const InferenceConfig& cfg) {
  bundle.validate();
  const auto kp = nms_extract(bundle.keypoint, {thresholds.t2, cfg.r2});
  const auto road = nms_extract(bundle.road, {thresholds.t1, cfg.r1});
  return merge_nodes(kp, road, merge_blockers(kp, road, cfg.merge_distance));
}

std::vector<EdgeCandidate> score_pairs(std::span<const ExtractedNode> nodes,
                                       const InferenceBundle& bundle, const Classifier& classifier,
                                       const FeatureLayout& layout, double pair_radius) {
  if (classifier.input_size() != layout.size())
    throw std::invalid_argument("classifier input width " + std::to_string(classifier.input_size()) +
                                " does not match the feature layout width " +
                                std::to_string(layout.size()));
  std::vector<Point> points;
  for (const auto& n : nodes) points.push_back(n.point);
  const SpatialIndex index(points, std::max(pair_radius, 1.0));
  std::vector<EdgeCandidate> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto near = index.query(points[i], pair_radius);
    std::sort(near.begin(), near.end());
    for (int j : near)
      if (static_cast<std::size_t>(j) > i) out.push_back({static_cast<int>(i), j, {}, 0.0});
  }
  const auto width = static_cast<std::size_t>(layout.size());
  parallel_for(out.size(), [&](std::size_t k) {
    EdgeCandidate& c = out[k];
    std::vector<double> x(width);
    const Point a = points[static_cast<std::size_t>(c.a)], b = points[static_cast<std::size_t>(c.b)];
    assemble_features_into(bundle.features, bundle.road, a, b, layout, x);
    const double ab = classifier.forward(x);
    assemble_features_into(bundle.features, bundle.road, b, a, layout, x);
    const double ba = classifier.forward(x);
    c.scores = {ab, ba};
    c.fused = (ab + ba) / 2.0;
  });
  std::sort(out.begin(), out.end(), [](const EdgeCandidate& x, const EdgeCandidate& y) {
    if (x.fused != y.fused) return x.fused > y.fused;
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  return out;
}

RoadGraph emit_graph(std::span<const ExtractedNode> nodes, std::span<const EdgeCandidate> candidates,
                     double t3, Extent extent, bool drop_isolated) {
  std::vector<char> used(nodes.size(), drop_isolated ? 0 : 1);
  std::vector<std::pair<int, int>> kept;
  for (const auto& c : candidates) {
    if (!(c.fused >= t3)) continue;
    kept.emplace_back(c.a, c.b);
    used[static_cast<std::size_t>(c.a)] = used[static_cast<std::size_t>(c.b)] = 1;
  }
  std::vector<int> remap(nodes.size(), -1);
  std::vector<Point> points;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!used[i]) continue;
    remap[i] = static_cast<int>(points.size());
    points.push_back(nodes[i].point);
  }
  std::sort(kept.begin(), kept.end());
  std::vector<Edge> edges;
  for (const auto& [a, b] : kept)
    edges.push_back({remap[static_cast<std::size_t>(a)], remap[static_cast<std::size_t>(b)]});
  return build_graph(points, edges, extent);
}

InferenceResult run_inference(const Scene& scene, const Classifier& classifier,
                              const FeatureLayout& layout, const InferenceConfig& cfg) {
  cfg.validate();
  InferenceResult result;
  auto& diag = result.diagnostics;
  auto t0 = std::chrono::steady_clock::now();
  const PatchPlan plan =
      plan_patches(scene.road.height(), scene.road.width(), cfg.patch_size, cfg.patch_stride);
  const InferenceBundle bundle = blend_bundle(scene, plan);
  diag.patches = plan.windows.size();
  diag.blend_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const auto nodes = extract_nodes(bundle, cfg.thresholds, cfg);
  for (const auto& n : nodes) (n.origin == NodeOrigin::KeypointMask ? diag.keypoint_nodes : diag.road_nodes)++;
  diag.extract_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const auto candidates = score_pairs(nodes, bundle, classifier, layout, cfg.pair_radius);
  diag.candidates = candidates.size();
  diag.score_ms = elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  result.graph = emit_graph(nodes, candidates, cfg.thresholds.t3,
                            Extent{scene.road.width(), scene.road.height()}, cfg.drop_isolated);
  diag.emitted_edges = result.graph.edge_count();
  diag.emit_ms = elapsed_ms(t0);
  return result;
}

// ---------------------------------------------------------------------------
// Threshold search

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(k * 0.05);
  return grid;
}

ThresholdSearch search_thresholds(std::span<const Scene> val, const Classifier& classifier,
                                  const FeatureLayout& layout, const InferenceConfig& cfg,
                                  const TopoConfig& topo_cfg, std::span<const double> grid_in) {
  if (val.empty()) throw std::invalid_argument("threshold search needs at least one validation scene");
  std::vector<double> grid(grid_in.begin(), grid_in.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) throw std::invalid_argument("threshold search grid is empty");
  for (double t : grid)
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("threshold grid values must lie in (0,1)");
  InferenceConfig base = cfg;
  base.thresholds = {grid.front(), grid.front(), grid.front()};
  base.validate();
  topo_cfg.validate();

  const std::size_t g = grid.size();
  std::vector<double> sum(g * g * g, 0.0);
  ThresholdSearch out;

  for (const Scene& scene : val) {
    check_scene(scene, true);
    const PatchPlan plan =
        plan_patches(scene.road.height(), scene.road.width(), base.patch_size, base.patch_stride);
    const InferenceBundle bundle = blend_bundle(scene, plan);
    // NMS at a higher threshold is a prefix of NMS at the lowest one.
    const auto kp = nms_extract(bundle.keypoint, {grid.front(), base.r2});
    const auto road = nms_extract(bundle.road, {grid.front(), base.r1});
    const auto blockers = merge_blockers(kp, road, base.merge_distance);

    // Every node that can appear at any grid point, keypoints first.
    std::vector<ExtractedNode> all;
    for (const Peak& p : kp) all.push_back({p.point, p.value, NodeOrigin::KeypointMask});
    for (const Peak& p : road) all.push_back({p.point, p.value, NodeOrigin::RoadMask});
    const auto candidates = score_pairs(all, bundle, classifier, layout, base.pair_radius);
    const Extent extent{scene.road.width(), scene.road.height()};

    auto prefix = [&](std::span<const Peak> peaks, double t) {
      std::size_t n = 0;
      while (n < peaks.size() && peaks[n].value >= t) ++n;
      return n;
    };

    std::map<std::vector<int>, double> memo;
    for (std::size_t i1 = 0; i1 < g; ++i1) {
      const std::size_t n1 = prefix(road, grid[i1]);
      for (std::size_t i2 = 0; i2 < g; ++i2) {
        const std::size_t n2 = prefix(kp, grid[i2]);
        std::vector<char> alive(all.size(), 0);
        for (std::size_t j = 0; j < n2; ++j) alive[j] = 1;
        for (std::size_t k = 0; k < n1; ++k) alive[kp.size() + k] = blockers[k] >= n2;
        std::vector<int> live;  // candidate indices, fused descending
        for (std::size_t c = 0; c < candidates.size(); ++c)
          if (alive[static_cast<std::size_t>(candidates[c].a)] && alive[static_cast<std::size_t>(candidates[c].b)])
            live.push_back(static_cast<int>(c));
        for (std::size_t i3 = 0; i3 < g; ++i3) {
          std::size_t n = 0;
          while (n < live.size() && candidates[static_cast<std::size_t>(live[n])].fused >= grid[i3]) ++n;
          std::vector<int> key(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(n));
          std::sort(key.begin(), key.end());
          auto it = memo.find(key);
          if (it == memo.end()) {
            std::vector<EdgeCandidate> kept;
            for (int c : key) kept.push_back(candidates[static_cast<std::size_t>(c)]);
            const RoadGraph proposal = emit_graph(all, kept, 0.0, extent, true);
            it = memo.emplace(std::move(key), topo(*scene.gt, proposal, topo_cfg).f1).first;
            ++out.evaluated;
          }
          sum[(i1 * g + i2) * g + i3] += it->second;
        }
      }
    }
  }

  double best = -1.0;
  for (std::size_t i1 = 0; i1 < g; ++i1)
    for (std::size_t i2 = 0; i2 < g; ++i2)
      for (std::size_t i3 = 0; i3 < g; ++i3) {
        const double f1 = sum[(i1 * g + i2) * g + i3] / static_cast<double>(val.size());
        if (f1 > best) {
          best = f1;
          out.best = {grid[i1], grid[i2], grid[i3]};
        }
      }
  out.f1 = best;
  return out;
}

}  // namespace roadgraph
