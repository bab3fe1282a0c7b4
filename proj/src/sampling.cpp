#include "roadgraph/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace roadgraph {

void SamplerConfig::validate() const {
  if (sources < 1) throw std::invalid_argument("sampler: N must be >= 1");
  if (!(resample_radius > 0.0)) throw std::invalid_argument("sampler: r must be positive");
  if (!(gather_radius > resample_radius))
    throw std::invalid_argument("sampler: R must exceed r");
  if (!(positive_budget > 0.0)) throw std::invalid_argument("sampler: path budget must be positive");
}

std::vector<Node> sample_sources(const RoadGraph& gt, std::span<const int> candidates,
                                 const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  std::map<int, int> degree_count;
  for (int id : candidates) ++degree_count[gt.node(id).degree];

  // Weighted sampling without replacement (Efraimidis-Spirakis): keep the
  // N largest keys log(u) / w.
  std::vector<std::pair<double, int>> keyed;
  keyed.reserve(candidates.size());
  for (int id : candidates) {
    const double weight = 1.0 / degree_count[gt.node(id).degree];
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    keyed.emplace_back(std::log(u) / weight, id);
  }
  const std::size_t take = std::min(keyed.size(), static_cast<std::size_t>(cfg.sources));
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(take), keyed.end(),
                    [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<Node> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(gt.node(keyed[i].second));
  return out;
}

std::vector<Node> sample_sources(const RoadGraph& gt, const SamplerConfig& cfg, Rng& rng) {
  std::vector<int> all(gt.vertex_count());
  std::iota(all.begin(), all.end(), 0);
  return sample_sources(gt, all, cfg, rng);
}

std::vector<LabeledTarget> gather_targets(const RoadGraph& gt, const Node& source,
                                          const SamplerConfig& cfg) {
  cfg.validate();
  const auto near = nodes_within(gt, source.point(), cfg.gather_radius, source.id);
  std::vector<LabeledTarget> out;
  if (near.empty()) return out;
  const auto dist = shortest_path_lengths(gt, source.id, cfg.positive_budget);
  out.reserve(near.size());
  for (const Node& t : near)
    out.push_back({t, dist[static_cast<std::size_t>(t.id)] <= cfg.positive_budget});
  return out;
}

Point disk_argmax(const ProbabilityMask& mask, Point p, double radius) {
  const int r0 = std::max(0, static_cast<int>(std::ceil(p.y - radius)));
  const int r1 = std::min(mask.height() - 1, static_cast<int>(std::floor(p.y + radius)));
  const int c0 = std::max(0, static_cast<int>(std::ceil(p.x - radius)));
  const int c1 = std::min(mask.width() - 1, static_cast<int>(std::floor(p.x + radius)));
  const double r2 = radius * radius;
  bool found = false;
  float best = 0.0f;
  Point best_point = p;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dx = c - p.x, dy = r - p.y;
      if (dx * dx + dy * dy > r2) continue;
      const float v = mask.at(r, c);
      if (!found || v > best) {
        found = true;
        best = v;
        best_point = {static_cast<double>(c), static_cast<double>(r)};
      }
    }
  }
  return best_point;
}

std::vector<NodePairSample> resample_targets(std::span<const NodePairSample> pairs,
                                             const ProbabilityMask& road_mask,
                                             const SamplerConfig& cfg) {
  cfg.validate();
  std::vector<NodePairSample> out;
  out.reserve(pairs.size());
  for (const NodePairSample& pair : pairs) {
    NodePairSample s = pair;
    s.target = disk_argmax(road_mask, pair.target, cfg.resample_radius);
    s.provenance = Provenance::ResampledTarget;
    out.push_back(s);
  }
  return out;
}

}  // namespace roadgraph
