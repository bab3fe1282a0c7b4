#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "roadgraph/geometry.hpp"
#include "roadgraph/mask_ops.hpp"
#include "roadgraph/raster.hpp"

namespace roadgraph {

/// Which mask samples along the pair line enter the feature vector.
enum class LineMode {
  Extended,     // n on each extension plus m on the segment
  SegmentOnly,  // m on the segment only
  Off,          // node features only
};

struct FeatureLayout {
  int channels = 6;
  int patch_extent = 1;  // k: node features are a k x k grid of bilinear reads
  LineMode line = LineMode::Extended;
  double extension = 8.0;
  int line_width = 3;
  int n = 15;
  int m = 20;

  int node_width() const { return channels * patch_extent * patch_extent; }
  int line_samples() const;
  /// 2Ck^2 + line samples.
  int size() const { return 2 * node_width() + line_samples(); }
  void validate() const;
};

/// Feature vector for a (source, target) pair, laid out [source | target | line].
struct PairFeatures {
  std::vector<double> source;
  std::vector<double> target;
  std::vector<double> line;

  std::vector<double> assembled() const;
};

PairFeatures assemble_features(const FeatureMap& features, const ProbabilityMask& road_mask,
                               Point source, Point target, const FeatureLayout& layout);
/// Writes the assembled vector directly; out.size() must equal layout.size().
void assemble_features_into(const FeatureMap& features, const ProbabilityMask& road_mask,
                            Point source, Point target, const FeatureLayout& layout,
                            std::span<double> out);

/// Row-major minibatch.
struct Batch {
  int width = 0;
  std::vector<double> features;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * static_cast<std::size_t>(width),
                                                     static_cast<std::size_t>(width));
  }
  void push(std::span<const double> x, double y);
};

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Feed-forward classifier: tanh hidden layers, logistic output.
///
/// Parameters are stored flat, layer by layer, weights (out x in, row-major)
/// followed by biases.
class Classifier {
 public:
  Classifier() = default;
  /// All-zero parameters. layer_sizes = {input, hidden..., 1}.
  explicit Classifier(std::vector<int> layer_sizes);
  /// Symmetric uniform fan-in initialization, biases zero.
  static Classifier initialized(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }

  /// Probability in (0,1); throws on dimension mismatch.
  double forward(std::span<const double> x) const;
  double logit(std::span<const double> x) const;
  std::vector<double> forward_batch(const Batch& batch) const;

  /// Mean clamped BCE over the batch; accumulates its gradient into grad.
  double loss_and_gradient(const Batch& batch, std::span<double> grad) const;

  friend bool operator==(const Classifier&, const Classifier&) = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) *
                                 static_cast<std::size_t>(sizes_[layer + 1]);
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

double sigmoid(double z);

/// Mean of -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps].
double bce_loss(std::span<const double> predicted, std::span<const double> labels);

struct TrainState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  static TrainState for_model(const Classifier& model, double learning_rate, std::uint64_t seed);
  friend bool operator==(const TrainState&, const TrainState&) = default;
};

/// One Adam step on the batch gradient; returns the pre-step batch loss.
/// Throws std::runtime_error if the loss or gradient is not finite.
double backward_and_step(Classifier& model, TrainState& state, const Batch& batch);

struct ThresholdSet {
  double t1 = 0.5;  // road-mask NMS
  double t2 = 0.5;  // keypoint-mask NMS
  double t3 = 0.5;  // fused edge score

  void validate() const;
  friend bool operator==(const ThresholdSet&, const ThresholdSet&) = default;
};

}  // namespace roadgraph
