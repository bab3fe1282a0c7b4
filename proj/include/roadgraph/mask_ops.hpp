#pragma once

#include <span>
#include <vector>

#include "roadgraph/geometry.hpp"
#include "roadgraph/raster.hpp"

namespace roadgraph {

struct NmsConfig {
  double threshold = 0.5;  // pixels below are ignored
  double radius = 8.0;     // suppression disk, Euclidean, inclusive

  void validate() const;
};

/// A peak returned by nms_extract: pixel (row, col) at point (col, row).
struct Peak {
  Point point;
  float value = 0.0f;

  friend bool operator==(const Peak&, const Peak&) = default;
};

/// Greedy non-maximum suppression. Repeatedly takes the largest surviving
/// pixel (ties: lowest row, then lowest col), records it and zeroes the disk
/// of `radius` around it. Output is in extraction order.
std::vector<Peak> nms_extract(const ProbabilityMask& mask, const NmsConfig& cfg);

/// Bilinear read with edge clamping.
double sample_bilinear(const ProbabilityMask& mask, Point p);
/// Per-channel bilinear read with edge clamping; writes feature.channels() values.
void sample_bilinear(const FeatureMap& features, Point p, std::span<double> out);
std::vector<double> sample_bilinear(const FeatureMap& features, Point p);

struct LineGeometry {
  Point a;
  Point b;
  double extension = 8.0;  // pixels beyond each endpoint
  int width = 3;           // pixels, odd
  int n = 15;              // samples on each extension
  int m = 20;              // samples on the segment, endpoints included

  void validate() const;
  int sample_count() const { return 2 * n + m; }
};

/// Mask samples along the extended line, ordered as one sweep from the far
/// end of the extension beyond `a`, through a -> b, to the far end beyond
/// `b`. Swapping a and b therefore reverses the vector. Each sample is the
/// mean of `width` bilinear reads at unit perpendicular offsets.
std::vector<double> sample_extended_line(const ProbabilityMask& mask, const LineGeometry& geom);
void sample_extended_line(const ProbabilityMask& mask, const LineGeometry& geom,
                          std::span<double> out);

struct MaskTile {
  ProbabilityMask mask;
  int row = 0;  // offset of the tile's top-left pixel on the canvas
  int col = 0;
};

/// Mean of overlapping tile values per canvas pixel; uncovered pixels are 0.
ProbabilityMask blend_masks(std::span<const MaskTile> tiles, int height, int width);

/// Crop of a mask; the window must lie inside the mask.
ProbabilityMask crop(const ProbabilityMask& mask, int row, int col, int height, int width);

}  // namespace roadgraph
