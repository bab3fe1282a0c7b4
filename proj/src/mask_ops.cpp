#include "roadgraph/mask_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace roadgraph {

void NmsConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("NMS threshold must lie in (0,1)");
  if (!(radius > 0.0)) throw std::invalid_argument("NMS radius must be positive");
}

std::vector<Peak> nms_extract(const ProbabilityMask& mask, const NmsConfig& cfg) {
  cfg.validate();
  std::vector<Peak> peaks;
  if (mask.empty()) return peaks;
  const int h = mask.height(), w = mask.width();
  const auto values = mask.values();

  std::vector<int> order;
  for (int i = 0; i < h * w; ++i) {
    if (values[static_cast<std::size_t>(i)] >= cfg.threshold) order.push_back(i);
  }
  // Row-major index order doubles as the (row, col) tie-break.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
  });

  std::vector<char> suppressed(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
  const int reach = static_cast<int>(std::floor(cfg.radius));
  const double r2 = cfg.radius * cfg.radius;
  for (int idx : order) {
    if (suppressed[static_cast<std::size_t>(idx)]) continue;
    const int row = idx / w, col = idx % w;
    peaks.push_back({Point{static_cast<double>(col), static_cast<double>(row)},
                     values[static_cast<std::size_t>(idx)]});
    for (int dr = -reach; dr <= reach; ++dr) {
      const int rr = row + dr;
      if (rr < 0 || rr >= h) continue;
      for (int dc = -reach; dc <= reach; ++dc) {
        const int cc = col + dc;
        if (cc < 0 || cc >= w) continue;
        if (static_cast<double>(dr * dr + dc * dc) <= r2)
          suppressed[static_cast<std::size_t>(rr) * static_cast<std::size_t>(w) +
                     static_cast<std::size_t>(cc)] = 1;
      }
    }
  }
  return peaks;
}

namespace {

struct BilinearCell {
  int r0, r1, c0, c1;
  double fr, fc;
};

BilinearCell locate(int height, int width, Point p) {
  const double x = std::clamp(p.x, 0.0, static_cast<double>(width - 1));
  const double y = std::clamp(p.y, 0.0, static_cast<double>(height - 1));
  BilinearCell cell{};
  cell.c0 = static_cast<int>(std::floor(x));
  cell.r0 = static_cast<int>(std::floor(y));
  cell.c1 = std::min(cell.c0 + 1, width - 1);
  cell.r1 = std::min(cell.r0 + 1, height - 1);
  cell.fc = x - cell.c0;
  cell.fr = y - cell.r0;
  return cell;
}

}  // namespace

double sample_bilinear(const ProbabilityMask& mask, Point p) {
  if (mask.empty()) throw std::invalid_argument("sample_bilinear on an empty mask");
  const BilinearCell c = locate(mask.height(), mask.width(), p);
  const double top = (1.0 - c.fc) * mask.at(c.r0, c.c0) + c.fc * mask.at(c.r0, c.c1);
  const double bottom = (1.0 - c.fc) * mask.at(c.r1, c.c0) + c.fc * mask.at(c.r1, c.c1);
  return (1.0 - c.fr) * top + c.fr * bottom;
}

void sample_bilinear(const FeatureMap& features, Point p, std::span<double> out) {
  if (features.empty()) throw std::invalid_argument("sample_bilinear on an empty feature map");
  if (out.size() != static_cast<std::size_t>(features.channels()))
    throw std::invalid_argument("sample_bilinear: output size does not match channel count");
  const BilinearCell c = locate(features.height(), features.width(), p);
  const auto v00 = features.pixel(c.r0, c.c0), v01 = features.pixel(c.r0, c.c1);
  const auto v10 = features.pixel(c.r1, c.c0), v11 = features.pixel(c.r1, c.c1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double top = (1.0 - c.fc) * v00[k] + c.fc * v01[k];
    const double bottom = (1.0 - c.fc) * v10[k] + c.fc * v11[k];
    out[k] = (1.0 - c.fr) * top + c.fr * bottom;
  }
}

std::vector<double> sample_bilinear(const FeatureMap& features, Point p) {
  std::vector<double> out(static_cast<std::size_t>(features.channels()));
  sample_bilinear(features, p, out);
  return out;
}

void LineGeometry::validate() const {
  if (a == b) throw std::invalid_argument("extended line needs distinct endpoints");
  if (!(extension >= 0.0)) throw std::invalid_argument("extension length must be >= 0");
  if (width < 1 || width % 2 == 0) throw std::invalid_argument("line width must be odd and >= 1");
  if (n < 1 || m < 1) throw std::invalid_argument("line sample counts must be >= 1");
}

void sample_extended_line(const ProbabilityMask& mask, const LineGeometry& geom,
                          std::span<double> out) {
  geom.validate();
  if (out.size() != static_cast<std::size_t>(geom.sample_count()))
    throw std::invalid_argument("sample_extended_line: output size must be 2n+m");
  const Point ab = geom.b - geom.a;
  const Point dir = ab * (1.0 / norm(ab));
  const Point perp{-dir.y, dir.x};
  const int half = (geom.width - 1) / 2;

  auto strip_mean = [&](Point p) {
    double sum = 0.0;
    for (int k = -half; k <= half; ++k) sum += sample_bilinear(mask, p + perp * static_cast<double>(k));
    return sum / geom.width;
  };

  std::size_t i = 0;
  for (int k = geom.n; k >= 1; --k)
    out[i++] = strip_mean(geom.a - dir * (geom.extension * k / geom.n));
  for (int j = 0; j < geom.m; ++j) {
    const double t = geom.m == 1 ? 0.5 : static_cast<double>(j) / (geom.m - 1);
    out[i++] = strip_mean(geom.a + ab * t);
  }
  for (int k = 1; k <= geom.n; ++k)
    out[i++] = strip_mean(geom.b + dir * (geom.extension * k / geom.n));
}

std::vector<double> sample_extended_line(const ProbabilityMask& mask, const LineGeometry& geom) {
  std::vector<double> out(static_cast<std::size_t>(geom.sample_count()));
  sample_extended_line(mask, geom, out);
  return out;
}

ProbabilityMask blend_masks(std::span<const MaskTile> tiles, int height, int width) {
  std::vector<double> sum(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0.0);
  std::vector<int> count(sum.size(), 0);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const MaskTile& tile = tiles[t];
    if (tile.row < 0 || tile.col < 0 || tile.row + tile.mask.height() > height ||
        tile.col + tile.mask.width() > width)
      throw std::out_of_range("blend_masks: tile " + std::to_string(t) + " exceeds the canvas");
    for (int r = 0; r < tile.mask.height(); ++r) {
      for (int c = 0; c < tile.mask.width(); ++c) {
        const std::size_t k = static_cast<std::size_t>(tile.row + r) * static_cast<std::size_t>(width) +
                              static_cast<std::size_t>(tile.col + c);
        sum[k] += tile.mask.at(r, c);
        ++count[k];
      }
    }
  }
  std::vector<float> out(sum.size(), 0.0f);
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (count[k] > 0) out[k] = std::clamp(static_cast<float>(sum[k] / count[k]), 0.0f, 1.0f);
  }
  return ProbabilityMask(height, width, std::move(out));
}

ProbabilityMask crop(const ProbabilityMask& mask, int row, int col, int height, int width) {
  if (row < 0 || col < 0 || height < 1 || width < 1 || row + height > mask.height() ||
      col + width > mask.width())
    throw std::out_of_range("crop window outside the mask");
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out.push_back(mask.at(row + r, col + c));
  return ProbabilityMask(height, width, std::move(out));
}

}  // namespace roadgraph
