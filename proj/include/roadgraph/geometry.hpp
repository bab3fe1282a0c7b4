#pragma once

#include <algorithm>
#include <cmath>

namespace roadgraph {

/// Continuous pixel coordinate: x is the column, y is the row, origin top-left.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
inline Point operator*(double s, Point a) { return {a.x * s, a.y * s}; }

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
inline double distance_sq(Point a, Point b) {
  const Point d = a - b;
  return d.x * d.x + d.y * d.y;
}

/// Pixel extent of a scene.
struct Extent {
  int width = 0;
  int height = 0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

struct SegmentProjection {
  double t = 0.0;  // parameter along a->b, in [0,1]
  Point point;
  double distance = 0.0;
};

/// Closest point to p on the segment a-b.
inline SegmentProjection project_onto_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len_sq = dot(ab, ab);
  double t = 0.0;
  if (len_sq > 0.0) t = std::clamp(dot(p - a, ab) / len_sq, 0.0, 1.0);
  const Point q = a + ab * t;
  return {t, q, distance(p, q)};
}

}  // namespace roadgraph
