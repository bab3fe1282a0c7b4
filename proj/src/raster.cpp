#include "roadgraph/raster.hpp"

#include <cmath>
#include <string>

namespace roadgraph {
namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1)
    throw std::invalid_argument("raster dimensions must be >= 1, got " + std::to_string(height) +
                                "x" + std::to_string(width));
}

bool is_probability(float v) { return v >= 0.0f && v <= 1.0f; }  // false for NaN

}  // namespace

ProbabilityMask::ProbabilityMask(int height, int width, float fill)
    : height_(height), width_(width) {
  check_dims(height, width);
  if (!is_probability(fill)) throw std::invalid_argument("mask fill value outside [0,1]");
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ProbabilityMask::ProbabilityMask(int height, int width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_dims(height, width);
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw std::invalid_argument("mask value count does not match dimensions");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!is_probability(values_[i]))
      throw std::invalid_argument("mask value at index " + std::to_string(i) + " outside [0,1]");
  }
}

void ProbabilityMask::set(int row, int col, float v) {
  if (!is_probability(v)) throw std::invalid_argument("mask value outside [0,1]");
  values_[index(row, col)] = v;
}

FeatureMap::FeatureMap(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width);
  if (channels < 1) throw std::invalid_argument("feature map needs at least one channel");
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                     static_cast<std::size_t>(channels),
                 0.0f);
}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  check_dims(height, width);
  if (channels < 1) throw std::invalid_argument("feature map needs at least one channel");
  if (values_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                            static_cast<std::size_t>(channels))
    throw std::invalid_argument("feature value count does not match dimensions");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw std::invalid_argument("non-finite feature value at index " + std::to_string(i));
  }
}

void FeatureMap::set(int row, int col, int channel, float v) {
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
  values_[offset(row, col) + channel] = v;
}

}  // namespace roadgraph
