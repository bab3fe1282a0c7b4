#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "roadgraph/config.hpp"
#include "roadgraph/connectivity.hpp"
#include "roadgraph/graph.hpp"
#include "roadgraph/metrics.hpp"
#include "roadgraph/pipeline.hpp"
#include "roadgraph/raster.hpp"
#include "roadgraph/synth.hpp"

namespace roadgraph {

/// Filesystem failures: missing files, unwritable directories.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents. The message carries a line number or byte offset.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);

// ---------------------------------------------------------------------------
// Graph text
//
//   roadgraph-graph 1
//   # free-form comment lines
//   extent <width> <height>
//   vertices <count>
//   <id> <x> <y>
//   edges <count>
//   <id> <id>

inline constexpr int kGraphFormatVersion = 1;

struct GraphDocument {
  RoadGraph graph;
  std::vector<std::string> comments;  // without the leading "# "
};

std::string format_graph(const RoadGraph& graph, const std::vector<std::string>& comments = {});
GraphDocument parse_graph(std::string_view text);

void save_graph(const fs::path& path, const RoadGraph& graph,
                const std::vector<std::string>& comments = {});
GraphDocument load_graph(const fs::path& path);

// ---------------------------------------------------------------------------
// RGX1 rasters

struct RasterData {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> values;
};

std::string encode_raster(const RasterData& raster);
/// Throws FormatError on a bad magic, a truncated or oversized payload, or a
/// non-finite value; truncation reports the byte offset where data ran out.
RasterData decode_raster(std::string_view bytes);

std::string encode_mask(const ProbabilityMask& mask);
std::string encode_features(const FeatureMap& features);
/// Requires one channel and values in [0,1].
ProbabilityMask decode_mask(std::string_view bytes);
FeatureMap decode_features(std::string_view bytes);

void save_mask(const fs::path& path, const ProbabilityMask& mask);
void save_features(const fs::path& path, const FeatureMap& features);
ProbabilityMask load_mask(const fs::path& path);
FeatureMap load_features(const fs::path& path);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainingConfig training;
  Classifier classifier;
  TrainState state;
  std::vector<double> epoch_losses;
  std::uint64_t seed = 0;

  std::uint64_t config_hash() const { return roadgraph::config_hash(training); }
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Verifies the stored hash against the embedded training config and the
/// parameter count against the layer sizes.
Checkpoint decode_checkpoint(std::string_view text);
void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const fs::path& path);

/// Throws ConfigError naming both hashes when `checkpoint` was trained under a
/// different training configuration.
void require_compatible(const Checkpoint& checkpoint, const TrainingConfig& training);

std::string hash_hex(std::uint64_t hash);

// ---------------------------------------------------------------------------
// Scenes and manifests
//
// A scene is <name>.scene.json next to <name>.road.rgx, <name>.keypoint.rgx,
// <name>.features.rgx and, when ground truth exists, <name>.gt.graph.

struct SceneRecord {
  std::string name;
  Split split = Split::Train;
  SceneSpec spec;
  CorruptionSpec corruption;
};

/// Writes the scene files into `dir`; returns the path of the scene JSON.
fs::path save_scene(const fs::path& dir, const SceneRecord& record, const SyntheticScene& scene);
Scene load_scene(const fs::path& scene_json);
SceneRecord load_scene_record(const fs::path& scene_json);

struct ManifestFile {
  fs::path path;  // the manifest itself; scene paths resolve against its directory
  std::uint64_t seed = 0;
  struct Entry {
    std::string name;
    Split split = Split::Train;
    std::uint64_t seed = 0;
    fs::path scene;  // as stored, relative to the manifest directory
  };
  std::vector<Entry> scenes;

  std::vector<fs::path> split_paths(Split split) const;
};

/// Generates every scene of `manifest` into `dir` and writes dir/manifest.json.
fs::path write_benchmark(const fs::path& dir, const Manifest& manifest);
ManifestFile load_manifest(const fs::path& path);

/// Loads all scenes of one split; throws std::invalid_argument if it is empty.
std::vector<Scene> load_split(const ManifestFile& manifest, Split split);

// ---------------------------------------------------------------------------
// Reports

struct SceneMetrics {
  std::string name;
  MetricsReport metrics;
};

struct EvalReport {
  std::vector<SceneMetrics> scenes;
  MetricsReport mean;  // macro average of precision, recall, F1 and APLS
};

EvalReport make_report(std::vector<SceneMetrics> scenes);
std::string format_report(const EvalReport& report);
EvalReport parse_report(std::string_view text);

}  // namespace roadgraph
