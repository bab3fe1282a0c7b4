#include "roadgraph/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "roadgraph/rng.hpp"

namespace roadgraph {

// ---------------------------------------------------------------------------
// Features

int FeatureLayout::line_samples() const {
  switch (line) {
    case LineMode::Extended: return 2 * n + m;
    case LineMode::SegmentOnly: return m;
    case LineMode::Off: return 0;
  }
  return 0;
}

void FeatureLayout::validate() const {
  if (channels < 1) throw std::invalid_argument("feature layout: channels must be >= 1");
  if (patch_extent < 1) throw std::invalid_argument("feature layout: patch extent must be >= 1");
  if (!(extension >= 0.0)) throw std::invalid_argument("feature layout: extension must be >= 0");
  if (line_width < 1 || line_width % 2 == 0)
    throw std::invalid_argument("feature layout: line width must be odd and >= 1");
  if (n < 1 || m < 1) throw std::invalid_argument("feature layout: n and m must be >= 1");
}

std::vector<double> PairFeatures::assembled() const {
  std::vector<double> out;
  out.reserve(source.size() + target.size() + line.size());
  out.insert(out.end(), source.begin(), source.end());
  out.insert(out.end(), target.begin(), target.end());
  out.insert(out.end(), line.begin(), line.end());
  return out;
}

namespace {

void node_patch(const FeatureMap& features, Point p, int extent, std::span<double> out) {
  const auto c = static_cast<std::size_t>(features.channels());
  const double half = (extent - 1) / 2.0;
  std::size_t k = 0;
  for (int i = 0; i < extent; ++i) {
    for (int j = 0; j < extent; ++j) {
      sample_bilinear(features, Point{p.x + j - half, p.y + i - half}, out.subspan(k * c, c));
      ++k;
    }
  }
}

}  // namespace

void assemble_features_into(const FeatureMap& features, const ProbabilityMask& road_mask,
                            Point source, Point target, const FeatureLayout& layout,
                            std::span<double> out) {
  if (features.channels() != layout.channels)
    throw std::invalid_argument("feature map has " + std::to_string(features.channels()) +
                                " channels, layout expects " + std::to_string(layout.channels));
  if (out.size() != static_cast<std::size_t>(layout.size()))
    throw std::invalid_argument("assemble_features: output size mismatch");
  const auto node = static_cast<std::size_t>(layout.node_width());
  node_patch(features, source, layout.patch_extent, out.subspan(0, node));
  node_patch(features, target, layout.patch_extent, out.subspan(node, node));
  auto line = out.subspan(2 * node);
  if (layout.line == LineMode::Off) return;
  if (source == target) {
    // Degenerate pair: no direction to sweep along; read the point itself.
    std::fill(line.begin(), line.end(), sample_bilinear(road_mask, source));
    return;
  }
  LineGeometry geom{source, target, layout.extension, layout.line_width, layout.n, layout.m};
  if (layout.line == LineMode::Extended) {
    sample_extended_line(road_mask, geom, line);
  } else {
    std::vector<double> full(static_cast<std::size_t>(geom.sample_count()));
    sample_extended_line(road_mask, geom, full);
    std::copy_n(full.begin() + layout.n, layout.m, line.begin());
  }
}

PairFeatures assemble_features(const FeatureMap& features, const ProbabilityMask& road_mask,
                               Point source, Point target, const FeatureLayout& layout) {
  std::vector<double> flat(static_cast<std::size_t>(layout.size()));
  assemble_features_into(features, road_mask, source, target, layout, flat);
  const auto node = static_cast<std::ptrdiff_t>(layout.node_width());
  PairFeatures f;
  f.source.assign(flat.begin(), flat.begin() + node);
  f.target.assign(flat.begin() + node, flat.begin() + 2 * node);
  f.line.assign(flat.begin() + 2 * node, flat.end());
  return f;
}

void Batch::push(std::span<const double> x, double y) {
  if (width == 0) width = static_cast<int>(x.size());
  if (x.size() != static_cast<std::size_t>(width))
    throw std::invalid_argument("batch row width mismatch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(y);
}

// ---------------------------------------------------------------------------
// Classifier

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Classifier::Classifier(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2 || sizes_.back() != 1)
    throw std::invalid_argument("classifier needs at least input and a single output unit");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1) throw std::invalid_argument("classifier layer sizes must be >= 1");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]) +
             static_cast<std::size_t>(sizes_[l + 1]);
  }
  params_.assign(total, 0.0);
}

Classifier Classifier::initialized(std::vector<int> layer_sizes, std::uint64_t seed) {
  Classifier c(std::move(layer_sizes));
  Rng rng(derive_seed(seed, 0x1417));
  for (std::size_t l = 0; l + 1 < c.sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.sizes_[l]));
    const std::size_t count =
        static_cast<std::size_t>(c.sizes_[l]) * static_cast<std::size_t>(c.sizes_[l + 1]);
    for (std::size_t i = 0; i < count; ++i)
      c.params_[c.weight_offset(l) + i] = rng.uniform(-bound, bound);
  }
  return c;
}

double Classifier::logit(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(input_size()))
    throw std::invalid_argument("classifier input has " + std::to_string(x.size()) +
                                " features, expected " + std::to_string(input_size()));
  std::vector<double> cur(x.begin(), x.end()), next;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    next.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * cur[i];
      next[o] = (l + 1 < layers) ? std::tanh(z) : z;
    }
    cur.swap(next);
  }
  return cur[0];
}

double Classifier::forward(std::span<const double> x) const { return sigmoid(logit(x)); }

std::vector<double> Classifier::forward_batch(const Batch& batch) const {
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out.push_back(forward(batch.row(i)));
  return out;
}

double Classifier::loss_and_gradient(const Batch& batch, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient size mismatch");
  if (batch.size() == 0) return 0.0;
  if (batch.width != input_size())
    throw std::invalid_argument("batch width does not match classifier input");
  const std::size_t layers = sizes_.size() - 1;
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<std::vector<double>> act(layers + 1);
  std::vector<double> delta, prev_delta;
  double loss = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto x = batch.row(s);
    act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
      const auto in = static_cast<std::size_t>(sizes_[l]);
      const auto out = static_cast<std::size_t>(sizes_[l + 1]);
      const double* w = params_.data() + weight_offset(l);
      const double* b = params_.data() + bias_offset(l);
      act[l + 1].assign(out, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        double z = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) z += row[i] * act[l][i];
        act[l + 1][o] = (l + 1 < layers) ? std::tanh(z) : z;
      }
    }
    const double y = batch.labels[s];
    const double raw = sigmoid(act[layers][0]);
    const double p = std::clamp(raw, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    // The clamp is flat outside [eps, 1-eps], so the gradient vanishes there.
    const bool clamped = raw != p;
    delta.assign(1, clamped ? 0.0 : (raw - y) * scale);

    for (std::size_t l = layers; l-- > 0;) {
      const auto in = static_cast<std::size_t>(sizes_[l]);
      const auto out = static_cast<std::size_t>(sizes_[l + 1]);
      const double* w = params_.data() + weight_offset(l);
      double* gw = grad.data() + weight_offset(l);
      double* gb = grad.data() + bias_offset(l);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        gb[o] += d;
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * act[l][i];
      }
      if (l == 0) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += row[i] * delta[o];
      }
      for (std::size_t i = 0; i < in; ++i) {
        const double a = act[l][i];
        prev_delta[i] *= 1.0 - a * a;
      }
      delta.swap(prev_delta);
    }
  }
  return loss * scale;
}

double bce_loss(std::span<const double> predicted, std::span<const double> labels) {
  if (predicted.size() != labels.size())
    throw std::invalid_argument("bce_loss: prediction and label counts differ");
  if (predicted.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double p = std::clamp(predicted[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    const double y = labels[i];
    sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------------------------
// Training

TrainState TrainState::for_model(const Classifier& model, double learning_rate,
                                 std::uint64_t seed) {
  TrainState s;
  s.first_moment.assign(model.parameters().size(), 0.0);
  s.second_moment.assign(model.parameters().size(), 0.0);
  s.learning_rate = learning_rate;
  s.seed = seed;
  return s;
}

double backward_and_step(Classifier& model, TrainState& state, const Batch& batch) {
  auto params = model.parameters();
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw std::invalid_argument("train state does not match the classifier shape");
  std::vector<double> grad(params.size(), 0.0);
  const double loss = model.loss_and_gradient(batch, grad);
  if (!std::isfinite(loss))
    throw std::runtime_error("non-finite training loss at step " + std::to_string(state.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw std::runtime_error("non-finite gradient for parameter " + std::to_string(i) +
                               " at step " + std::to_string(state.step));
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    params[i] -= state.learning_rate * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
  }
  return loss;
}

void ThresholdSet::validate() const {
  for (double t : {t1, t2, t3}) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("thresholds must lie in (0,1)");
  }
}

}  // namespace roadgraph
