#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "roadgraph/metrics.hpp"
#include "roadgraph/pipeline.hpp"
#include "roadgraph/synth.hpp"

namespace roadgraph {

/// Thrown for malformed or invalid configuration documents. The message names
/// the offending key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  TrainingConfig training;
  InferenceConfig inference;
  TopoConfig topo;
  AplsConfig apls;
  std::vector<double> threshold_grid = default_threshold_grid();
  BenchmarkSpec benchmark;
  BenchmarkCounts counts;

  /// Runs every per-type validation; throws ConfigError.
  void validate() const;
};

/// Parses a JSON document. Missing keys keep their defaults; unknown keys,
/// wrong types and invariant violations throw ConfigError.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);

/// Canonical JSON with every key present, sorted, two-space indented.
std::string config_to_json(const RunConfig& cfg);

/// Canonical JSON of the training section alone.
std::string training_config_json(const TrainingConfig& training);
TrainingConfig parse_training_config(std::string_view json_text);

/// FNV-1a 64 of training_config_json: identifies everything that shapes the
/// classifier and its training data.
std::uint64_t config_hash(const TrainingConfig& training);

std::string to_string(LineMode mode);
LineMode parse_line_mode(const std::string& name);

}  // namespace roadgraph
