#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "roadgraph/graph.hpp"
#include "roadgraph/raster.hpp"

namespace roadgraph {

enum class SceneStyle { UrbanGrid, RuralCurves, Mixed };

std::string to_string(SceneStyle style);
SceneStyle parse_style(const std::string& name);

struct SceneSpec {
  int extent = 256;
  SceneStyle style = SceneStyle::UrbanGrid;
  double road_width = 4.0;
  double junction_density = 200.0;  // junctions per (1000 px)^2
  std::uint64_t seed = 0;

  double jitter = 4.0;                // max lattice displacement per axis, px
  double diagonal_probability = 0.15; // chance of a diagonal connector per cell
  double drop_probability = 0.1;      // chance a lattice edge is removed
  double margin = 16.0;
  double min_separation = 10.0;       // junctions closer than this are merged
  double node_spacing = 12.0;         // max GT edge length after densification; 0 keeps junction edges

  void validate() const;
};

struct CorruptionSpec {
  int occlusions = 0;
  double occlusion_min = 5.0;  // semi-axis range, px
  double occlusion_max = 10.0;
  double warp = 0.0;           // max displacement, px
  double noise = 0.0;          // additive Gaussian sigma
  double blur = 0.0;           // blur radius, px

  void validate() const;
  bool is_zero() const {
    return occlusions == 0 && warp == 0.0 && noise == 0.0 && blur == 0.0;
  }
};

struct SyntheticScene {
  SceneSpec spec;
  CorruptionSpec corruption;
  RoadGraph gt;
  ProbabilityMask clean_road;
  ProbabilityMask clean_keypoint;
  ProbabilityMask road;
  ProbabilityMask keypoint;
  FeatureMap features;
};

inline constexpr int kSurrogateChannels = 6;
inline constexpr double kKeypointSigma = 2.0;
inline constexpr double kKeypointInterval = 32.0;
inline constexpr double kRoadFalloff = 2.0;
inline constexpr double kCornerAngle = 30.0;  // degrees of turn that make a degree-2 vertex a site

/// Procedural GT road graph: planar, at most three connected components,
/// deterministic per spec.
RoadGraph generate_graph(const SceneSpec& spec);

/// Road value at distance d from the nearest centerline.
double road_profile(double d, double road_width);

/// Clean renders: road mask and keypoint mask.
std::pair<ProbabilityMask, ProbabilityMask> render_masks(const RoadGraph& gt, const SceneSpec& spec);

/// Points that carry keypoint bumps, rounded to pixels: vertices of degree
/// != 2, degree-2 vertices turning by more than kCornerAngle, and evenly
/// spaced points at most 32 px apart along the stretches between them.
std::vector<Point> keypoint_sites(const RoadGraph& gt);

/// Smooth random displacement field: per axis a sum of eight low-frequency
/// sinusoids, scaled so the vector magnitude never exceeds `max_displacement`.
class DisplacementField {
 public:
  DisplacementField(double max_displacement, std::uint64_t seed);
  /// Same waves, rescaled so the largest magnitude over the pixel centers of
  /// `grid` equals `max_displacement` exactly.
  DisplacementField(double max_displacement, std::uint64_t seed, Extent grid);
  Point at(Point p) const;
  double bound() const { return max_; }

 private:
  struct Wave {
    double amplitude, fx, fy, phase;
  };
  double max_;
  std::array<std::vector<Wave>, 2> waves_;
};

struct Ellipse {
  Point center;
  double a = 1.0, b = 1.0, angle = 0.0;

  bool contains(Point p) const;
  /// Approximate Euclidean distance from an outside point to the boundary; 0 inside.
  double outside_distance(Point p) const;
};

/// Multiplicative occlusion factor: 0 inside, rising to 1 over a 2 px band.
double occlusion_factor(const std::vector<Ellipse>& ellipses, Point p);

ProbabilityMask warp_mask(const ProbabilityMask& mask, const DisplacementField& field);
ProbabilityMask blur_mask(const ProbabilityMask& mask, double radius);

struct CorruptedRasters {
  ProbabilityMask road;
  ProbabilityMask keypoint;
  FeatureMap features;
  std::vector<Ellipse> occluders;
};

/// warp -> occlusion -> blur -> noise -> clamp, then the surrogate feature map
/// [road, keypoint, blur(road, 4), x / W, y / H, noise].
CorruptedRasters corrupt(const RoadGraph& gt, const ProbabilityMask& road,
                         const ProbabilityMask& keypoint, const CorruptionSpec& cspec,
                         std::uint64_t seed);

SyntheticScene make_scene(const SceneSpec& spec, const CorruptionSpec& cspec);

// ---------------------------------------------------------------------------
// Benchmarks

enum class Split { Train, Val, TestIn, TestOut };
std::string to_string(Split split);
Split parse_split(const std::string& name);

struct BenchmarkCounts {
  int train = 4, val = 1, test_in = 2, test_out = 1;
};

struct BenchmarkSpec {
  SceneSpec base;                       // extent, width, density etc.; style and seed are overridden
  std::vector<SceneStyle> train_styles{SceneStyle::UrbanGrid};
  SceneStyle test_out_style = SceneStyle::RuralCurves;
  CorruptionSpec corruption;            // train, val and test-in
  CorruptionSpec test_out_corruption;   // usually heavier
};

struct ManifestEntry {
  std::string name;
  Split split = Split::Train;
  SceneSpec spec;
  CorruptionSpec corruption;
};

struct Manifest {
  std::uint64_t seed = 0;
  BenchmarkSpec benchmark;
  std::vector<ManifestEntry> scenes;

  std::vector<const ManifestEntry*> split(Split s) const;
};

inline constexpr std::uint64_t kSplitSeedStride = 1'000'000;

/// Scene list with disjoint per-split seed ranges; test-out draws its style
/// from outside the training styles.
Manifest make_benchmark(const BenchmarkCounts& counts, const BenchmarkSpec& spec, std::uint64_t seed);

}  // namespace roadgraph
