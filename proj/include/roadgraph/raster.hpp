#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace roadgraph {

/// H x W grid of per-pixel probabilities in [0,1], row-major.
///
/// Pixel (row, col) sits at continuous coordinate (x = col, y = row).
class ProbabilityMask {
 public:
  ProbabilityMask() = default;
  ProbabilityMask(int height, int width, float fill = 0.0f);
  /// Takes ownership of row-major values; throws std::invalid_argument if any
  /// value is outside [0,1] or the size does not match.
  ProbabilityMask(int height, int width, std::vector<float> values);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return values_.empty(); }

  float at(int row, int col) const { return values_[index(row, col)]; }
  /// Checked write; throws if v is outside [0,1].
  void set(int row, int col, float v);

  std::span<const float> values() const { return values_; }

  friend bool operator==(const ProbabilityMask&, const ProbabilityMask&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

/// H x W x C grid of finite reals, row-major with channel innermost.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels);
  FeatureMap(int height, int width, int channels, std::vector<float> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return values_.empty(); }

  std::span<const float> pixel(int row, int col) const {
    return {values_.data() + offset(row, col), static_cast<std::size_t>(channels_)};
  }
  float at(int row, int col, int channel) const { return values_[offset(row, col) + channel]; }
  void set(int row, int col, int channel, float v);

  std::span<const float> values() const { return values_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(col)) *
           static_cast<std::size_t>(channels_);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

}  // namespace roadgraph
