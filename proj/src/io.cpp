#include "roadgraph/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "json.hpp"
#include "roadgraph/threading.hpp"

namespace roadgraph {

using json = nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return std::move(buf).str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("error while writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

namespace {

void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

template <class T>
void append_number(std::string& out, T v)
  requires std::is_integral_v<T>
{
  std::array<char, 24> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

/// Whitespace-separated tokens of one line.
std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw FormatError("graph file line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_token(std::string_view tok, std::size_t line, const char* what) {
  T v{};
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    line_error(line, std::string("invalid ") + what + " '" + std::string(tok) + "'");
  return v;
}

}  // namespace

std::string format_graph(const RoadGraph& graph, const std::vector<std::string>& comments) {
  std::string out = "roadgraph-graph " + std::to_string(kGraphFormatVersion) + "\n";
  for (const auto& c : comments) {
    if (c.find('\n') != std::string::npos)
      throw std::invalid_argument("graph comments must be single lines");
    out += c.empty() ? "#\n" : "# " + c + "\n";
  }
  out += "extent ";
  append_number(out, graph.width());
  out += ' ';
  append_number(out, graph.height());
  out += "\nvertices ";
  append_number(out, graph.vertex_count());
  out += '\n';
  for (const Node& n : graph.nodes()) {
    append_number(out, n.id);
    out += ' ';
    append_number(out, n.x);
    out += ' ';
    append_number(out, n.y);
    out += '\n';
  }
  out += "edges ";
  append_number(out, graph.edge_count());
  out += '\n';
  for (const Edge& e : graph.edges()) {
    append_number(out, e.u);
    out += ' ';
    append_number(out, e.v);
    out += '\n';
  }
  return out;
}

GraphDocument parse_graph(std::string_view text) {
  GraphDocument doc;
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> lines;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    if (line[first] == '#') {
      std::string_view c = line.substr(first + 1);
      if (!c.empty() && c.front() == ' ') c.remove_prefix(1);
      while (!c.empty() && c.back() == '\r') c.remove_suffix(1);
      doc.comments.emplace_back(c);
      continue;
    }
    lines.emplace_back(line_no, tokens(line));
  }

  std::size_t k = 0;
  auto next = [&](const char* expected) -> const auto& {
    if (k >= lines.size())
      throw FormatError(std::string("graph file ends early: expected ") + expected);
    return lines[k++];
  };

  {
    const auto& [ln, t] = next("a version line");
    if (t.size() != 2 || t[0] != "roadgraph-graph") line_error(ln, "expected 'roadgraph-graph <version>'");
    const int version = parse_token<int>(t[1], ln, "version");
    if (version != kGraphFormatVersion)
      line_error(ln, "unsupported graph format version " + std::to_string(version));
  }
  Extent extent;
  {
    const auto& [ln, t] = next("an extent line");
    if (t.size() != 3 || t[0] != "extent") line_error(ln, "expected 'extent <width> <height>'");
    extent.width = parse_token<int>(t[1], ln, "width");
    extent.height = parse_token<int>(t[2], ln, "height");
  }
  std::vector<RawVertex> vertices;
  {
    const auto& [ln, t] = next("a vertices line");
    if (t.size() != 2 || t[0] != "vertices") line_error(ln, "expected 'vertices <count>'");
    const auto count = parse_token<std::size_t>(t[1], ln, "vertex count");
    if (count > lines.size()) line_error(ln, "vertex count exceeds the file length");
    vertices.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& [vl, vt] = next("a vertex line");
      if (vt.size() != 3) line_error(vl, "expected '<id> <x> <y>'");
      vertices.push_back({parse_token<std::int64_t>(vt[0], vl, "vertex id"),
                          parse_token<double>(vt[1], vl, "x coordinate"),
                          parse_token<double>(vt[2], vl, "y coordinate")});
    }
  }
  std::vector<RawEdge> edges;
  {
    const auto& [ln, t] = next("an edges line");
    if (t.size() != 2 || t[0] != "edges") line_error(ln, "expected 'edges <count>'");
    const auto count = parse_token<std::size_t>(t[1], ln, "edge count");
    if (count > lines.size()) line_error(ln, "edge count exceeds the file length");
    edges.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& [el, et] = next("an edge line");
      if (et.size() != 2) line_error(el, "expected '<id> <id>'");
      edges.emplace_back(parse_token<std::int64_t>(et[0], el, "vertex id"),
                         parse_token<std::int64_t>(et[1], el, "vertex id"));
    }
  }
  if (k != lines.size()) line_error(lines[k].first, "unexpected content after the edge list");

  try {
    doc.graph = build_graph(vertices, edges, extent);
  } catch (const GraphError& e) {
    throw FormatError(std::string("invalid graph: ") + e.what());
  }
  return doc;
}

void save_graph(const fs::path& path, const RoadGraph& graph, const std::vector<std::string>& comments) {
  write_file_atomic(path, format_graph(graph, comments));
}

GraphDocument load_graph(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_graph(text);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kRasterMagic{'R', 'G', 'X', '1'};
constexpr std::size_t kRasterHeader = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_raster(const RasterData& raster) {
  const std::size_t n = static_cast<std::size_t>(raster.height) * raster.width * raster.channels;
  if (raster.values.size() != n)
    throw std::invalid_argument("raster value count does not match height * width * channels");
  std::string out;
  out.reserve(kRasterHeader + 4 * n);
  out.append(kRasterMagic.data(), kRasterMagic.size());
  put_u32(out, raster.height);
  put_u32(out, raster.width);
  put_u32(out, raster.channels);
  for (float f : raster.values) {
    if (!std::isfinite(f)) throw std::invalid_argument("raster values must be finite");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

RasterData decode_raster(std::string_view bytes) {
  if (bytes.size() < kRasterMagic.size())
    throw FormatError("raster truncated at byte offset " + std::to_string(bytes.size()) +
                      ": expected 4-byte magic");
  if (std::memcmp(bytes.data(), kRasterMagic.data(), kRasterMagic.size()) != 0)
    throw FormatError("raster has bad magic at byte offset 0 (expected RGX1)");
  if (bytes.size() < kRasterHeader)
    throw FormatError("raster truncated at byte offset " + std::to_string(bytes.size()) +
                      ": header needs 16 bytes");
  RasterData r;
  r.height = get_u32(bytes, 4);
  r.width = get_u32(bytes, 8);
  r.channels = get_u32(bytes, 12);
  const unsigned __int128 n128 = static_cast<unsigned __int128>(r.height) * r.width * r.channels;
  const unsigned __int128 need = kRasterHeader + 4 * n128;
  if (need > bytes.size()) {
    const std::size_t have = bytes.size();
    const std::size_t complete = (have - kRasterHeader) / 4;
    throw FormatError("raster truncated at byte offset " + std::to_string(have) + ": value " +
                      std::to_string(complete) + " of " +
                      std::to_string(static_cast<unsigned long long>(n128)) + " is incomplete");
  }
  if (need < bytes.size())
    throw FormatError("raster has " + std::to_string(bytes.size() - static_cast<std::size_t>(need)) +
                      " trailing bytes after byte offset " +
                      std::to_string(static_cast<std::size_t>(need)));
  const auto n = static_cast<std::size_t>(n128);
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = kRasterHeader + 4 * i;
    const float f = std::bit_cast<float>(get_u32(bytes, at));
    if (!std::isfinite(f))
      throw FormatError("raster value at byte offset " + std::to_string(at) + " is not finite");
    r.values[i] = f;
  }
  return r;
}

std::string encode_mask(const ProbabilityMask& mask) {
  RasterData r{static_cast<std::uint32_t>(mask.height()), static_cast<std::uint32_t>(mask.width()), 1,
               {mask.values().begin(), mask.values().end()}};
  return encode_raster(r);
}

std::string encode_features(const FeatureMap& features) {
  RasterData r{static_cast<std::uint32_t>(features.height()),
               static_cast<std::uint32_t>(features.width()),
               static_cast<std::uint32_t>(features.channels()),
               {features.values().begin(), features.values().end()}};
  return encode_raster(r);
}

namespace {

void check_dims(const RasterData& r) {
  constexpr auto max_int = static_cast<std::uint32_t>(std::numeric_limits<int>::max());
  if (r.height > max_int || r.width > max_int || r.channels > max_int)
    throw FormatError("raster dimensions exceed the supported range");
}

}  // namespace

ProbabilityMask decode_mask(std::string_view bytes) {
  RasterData r = decode_raster(bytes);
  check_dims(r);
  if (r.channels != 1)
    throw FormatError("mask raster must have 1 channel, found " + std::to_string(r.channels));
  for (std::size_t i = 0; i < r.values.size(); ++i)
    if (r.values[i] < 0.0f || r.values[i] > 1.0f)
      throw FormatError("mask value at byte offset " + std::to_string(kRasterHeader + 4 * i) +
                        " is outside [0,1]");
  return ProbabilityMask(static_cast<int>(r.height), static_cast<int>(r.width), std::move(r.values));
}

FeatureMap decode_features(std::string_view bytes) {
  RasterData r = decode_raster(bytes);
  check_dims(r);
  return FeatureMap(static_cast<int>(r.height), static_cast<int>(r.width),
                    static_cast<int>(r.channels), std::move(r.values));
}

namespace {

template <class F>
auto with_path(const fs::path& path, F&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_mask(const fs::path& path, const ProbabilityMask& mask) {
  write_file_atomic(path, encode_mask(mask));
}

void save_features(const fs::path& path, const FeatureMap& features) {
  write_file_atomic(path, encode_features(features));
}

ProbabilityMask load_mask(const fs::path& path) {
  const std::string bytes = read_file(path);
  return with_path(path, [&] { return decode_mask(bytes); });
}

FeatureMap load_features(const fs::path& path) {
  const std::string bytes = read_file(path);
  return with_path(path, [&] { return decode_features(bytes); });
}

// ---------------------------------------------------------------------------

std::string hash_hex(std::uint64_t hash) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, hash >>= 4) s[static_cast<std::size_t>(i)] = digits[hash & 0xF];
  return s;
}

namespace {

std::uint64_t parse_hash_hex(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (s.size() != 16 || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("checkpoint config_hash must be 16 hex digits");
  return v;
}

template <class T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("field '") + key + "' has the wrong type");
  }
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

void expect_format(const json& j, const char* format, int version) {
  if (!j.is_object() || field<std::string>(j, "format") != format)
    throw FormatError(std::string("not a ") + format + " document");
  const int v = field<int>(j, "version");
  if (v != version) throw FormatError("unsupported " + std::string(format) + " version " + std::to_string(v));
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  json j;
  j["format"] = "roadgraph-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config_hash"] = hash_hex(c.config_hash());
  j["seed"] = c.seed;
  j["training"] = json::parse(training_config_json(c.training));
  j["layer_sizes"] = c.classifier.layer_sizes();
  j["parameters"] = std::vector<double>(c.classifier.parameters().begin(), c.classifier.parameters().end());
  j["adam"] = {{"step", c.state.step},
               {"learning_rate", c.state.learning_rate},
               {"beta1", c.state.beta1},
               {"beta2", c.state.beta2},
               {"epsilon", c.state.epsilon},
               {"seed", c.state.seed},
               {"first_moment", c.state.first_moment},
               {"second_moment", c.state.second_moment}};
  j["epoch_losses"] = c.epoch_losses;
  return j.dump(1) + "\n";
}

Checkpoint decode_checkpoint(std::string_view text) {
  const json j = parse_json(text, "checkpoint");
  expect_format(j, "roadgraph-checkpoint", kCheckpointVersion);
  Checkpoint c;
  try {
    c.training = parse_training_config(field<json>(j, "training").dump());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint training config: ") + e.what());
  }
  const std::uint64_t stored = parse_hash_hex(field<std::string>(j, "config_hash"));
  if (stored != c.config_hash())
    throw FormatError("checkpoint config_hash " + hash_hex(stored) +
                      " does not match its embedded training config (" + hash_hex(c.config_hash()) + ")");
  c.seed = field<std::uint64_t>(j, "seed");

  const auto sizes = field<std::vector<int>>(j, "layer_sizes");
  if (sizes != c.training.layer_sizes())
    throw FormatError("checkpoint layer sizes do not match its training config");
  c.classifier = Classifier(sizes);
  const auto params = field<std::vector<double>>(j, "parameters");
  if (params.size() != c.classifier.parameters().size())
    throw FormatError("checkpoint holds " + std::to_string(params.size()) + " parameters, layer sizes need " +
                      std::to_string(c.classifier.parameters().size()));
  std::copy(params.begin(), params.end(), c.classifier.parameters().begin());

  const json& adam = field<json>(j, "adam");
  c.state.step = field<std::int64_t>(adam, "step");
  c.state.learning_rate = field<double>(adam, "learning_rate");
  c.state.beta1 = field<double>(adam, "beta1");
  c.state.beta2 = field<double>(adam, "beta2");
  c.state.epsilon = field<double>(adam, "epsilon");
  c.state.seed = field<std::uint64_t>(adam, "seed");
  c.state.first_moment = field<std::vector<double>>(adam, "first_moment");
  c.state.second_moment = field<std::vector<double>>(adam, "second_moment");
  if (c.state.first_moment.size() != params.size() || c.state.second_moment.size() != params.size())
    throw FormatError("checkpoint Adam moments do not match the parameter count");
  c.epoch_losses = field<std::vector<double>>(j, "epoch_losses");
  for (double v : params)
    if (!std::isfinite(v)) throw FormatError("checkpoint parameters must be finite");
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::string text = read_file(path);
  return with_path(path, [&] { return decode_checkpoint(text); });
}

void require_compatible(const Checkpoint& checkpoint, const TrainingConfig& training) {
  const std::uint64_t want = config_hash(training);
  if (checkpoint.config_hash() != want)
    throw ConfigError("checkpoint config hash " + hash_hex(checkpoint.config_hash()) +
                      " does not match the current training config hash " + hash_hex(want));
}

// ---------------------------------------------------------------------------

namespace {

json spec_json(const SceneSpec& s) {
  return {{"extent", s.extent},
          {"style", to_string(s.style)},
          {"road_width", s.road_width},
          {"junction_density", s.junction_density},
          {"seed", s.seed},
          {"jitter", s.jitter},
          {"diagonal_probability", s.diagonal_probability},
          {"drop_probability", s.drop_probability},
          {"margin", s.margin},
          {"min_separation", s.min_separation},
          {"node_spacing", s.node_spacing}};
}

SceneSpec read_spec(const json& j) {
  SceneSpec s;
  s.extent = field<int>(j, "extent");
  try {
    s.style = parse_style(field<std::string>(j, "style"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  s.road_width = field<double>(j, "road_width");
  s.junction_density = field<double>(j, "junction_density");
  s.seed = field<std::uint64_t>(j, "seed");
  s.jitter = field<double>(j, "jitter");
  s.diagonal_probability = field<double>(j, "diagonal_probability");
  s.drop_probability = field<double>(j, "drop_probability");
  s.margin = field<double>(j, "margin");
  s.min_separation = field<double>(j, "min_separation");
  s.node_spacing = field<double>(j, "node_spacing");
  return s;
}

json corruption_json(const CorruptionSpec& c) {
  return {{"occlusions", c.occlusions}, {"occlusion_min", c.occlusion_min},
          {"occlusion_max", c.occlusion_max}, {"warp", c.warp},
          {"noise", c.noise}, {"blur", c.blur}};
}

CorruptionSpec read_corruption(const json& j) {
  CorruptionSpec c;
  c.occlusions = field<int>(j, "occlusions");
  c.occlusion_min = field<double>(j, "occlusion_min");
  c.occlusion_max = field<double>(j, "occlusion_max");
  c.warp = field<double>(j, "warp");
  c.noise = field<double>(j, "noise");
  c.blur = field<double>(j, "blur");
  return c;
}

Split read_split(const json& j) {
  try {
    return parse_split(field<std::string>(j, "split"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

}  // namespace

fs::path save_scene(const fs::path& dir, const SceneRecord& record, const SyntheticScene& scene) {
  const std::string& n = record.name;
  if (n.empty() || n.find('/') != std::string::npos) throw std::invalid_argument("invalid scene name '" + n + "'");
  save_mask(dir / (n + ".road.rgx"), scene.road);
  save_mask(dir / (n + ".keypoint.rgx"), scene.keypoint);
  save_features(dir / (n + ".features.rgx"), scene.features);
  save_graph(dir / (n + ".gt.graph"), scene.gt);
  json j;
  j["format"] = "roadgraph-scene";
  j["version"] = 1;
  j["name"] = n;
  j["split"] = to_string(record.split);
  j["spec"] = spec_json(record.spec);
  j["corruption"] = corruption_json(record.corruption);
  j["road"] = n + ".road.rgx";
  j["keypoint"] = n + ".keypoint.rgx";
  j["features"] = n + ".features.rgx";
  j["gt"] = n + ".gt.graph";
  const fs::path path = dir / (n + ".scene.json");
  write_file_atomic(path, j.dump(2) + "\n");
  return path;
}

namespace {

json load_scene_json(const fs::path& path) {
  const json j = parse_json(read_file(path), "scene file");
  with_path(path, [&] {
    expect_format(j, "roadgraph-scene", 1);
    return 0;
  });
  return j;
}

}  // namespace

SceneRecord load_scene_record(const fs::path& scene_json) {
  const json j = load_scene_json(scene_json);
  return with_path(scene_json, [&] {
    return SceneRecord{field<std::string>(j, "name"), read_split(j), read_spec(field<json>(j, "spec")),
                       read_corruption(field<json>(j, "corruption"))};
  });
}

Scene load_scene(const fs::path& scene_json) {
  const json j = load_scene_json(scene_json);
  const fs::path dir = scene_json.parent_path();
  Scene s;
  with_path(scene_json, [&] {
    s.name = field<std::string>(j, "name");
    return 0;
  });
  auto member = [&](const char* key) {
    return with_path(scene_json, [&] { return dir / field<std::string>(j, key); });
  };
  s.road = load_mask(member("road"));
  s.keypoint = load_mask(member("keypoint"));
  s.features = load_features(member("features"));
  if (j.contains("gt") && !j["gt"].is_null()) s.gt = load_graph(member("gt")).graph;
  if (s.road.height() != s.keypoint.height() || s.road.width() != s.keypoint.width() ||
      s.road.height() != s.features.height() || s.road.width() != s.features.width())
    throw FormatError(scene_json.string() + ": scene rasters have mismatched dimensions");
  return s;
}

std::vector<fs::path> ManifestFile::split_paths(Split split) const {
  std::vector<fs::path> out;
  for (const auto& e : scenes)
    if (e.split == split) out.push_back(path.parent_path() / e.scene);
  return out;
}

fs::path write_benchmark(const fs::path& dir, const Manifest& manifest) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  std::vector<fs::path> paths(manifest.scenes.size());
  parallel_for(manifest.scenes.size(), [&](std::size_t i) {
    const ManifestEntry& e = manifest.scenes[i];
    const SyntheticScene scene = make_scene(e.spec, e.corruption);
    paths[i] = save_scene(dir, SceneRecord{e.name, e.split, e.spec, e.corruption}, scene);
  });
  json j;
  j["format"] = "roadgraph-manifest";
  j["version"] = 1;
  j["seed"] = manifest.seed;
  json list = json::array();
  for (std::size_t i = 0; i < manifest.scenes.size(); ++i) {
    const ManifestEntry& e = manifest.scenes[i];
    list.push_back({{"name", e.name},
                    {"split", to_string(e.split)},
                    {"seed", e.spec.seed},
                    {"scene", paths[i].filename().string()}});
  }
  j["scenes"] = std::move(list);
  const fs::path path = dir / "manifest.json";
  write_file_atomic(path, j.dump(2) + "\n");
  return path;
}

ManifestFile load_manifest(const fs::path& path) {
  const json j = parse_json(read_file(path), "manifest");
  return with_path(path, [&] {
    expect_format(j, "roadgraph-manifest", 1);
    ManifestFile m;
    m.path = path;
    m.seed = field<std::uint64_t>(j, "seed");
    for (const json& e : field<json>(j, "scenes")) {
      m.scenes.push_back({field<std::string>(e, "name"), read_split(e), field<std::uint64_t>(e, "seed"),
                          fs::path(field<std::string>(e, "scene"))});
    }
    return m;
  });
}

std::vector<Scene> load_split(const ManifestFile& manifest, Split split) {
  const auto paths = manifest.split_paths(split);
  if (paths.empty())
    throw std::invalid_argument("manifest '" + manifest.path.string() + "' has no " + to_string(split) + " scenes");
  std::vector<Scene> scenes(paths.size());
  parallel_for(paths.size(), [&](std::size_t i) { scenes[i] = load_scene(paths[i]); });
  return scenes;
}

// ---------------------------------------------------------------------------

EvalReport make_report(std::vector<SceneMetrics> scenes) {
  if (scenes.empty()) throw std::invalid_argument("a report needs at least one scene");
  EvalReport r;
  r.scenes = std::move(scenes);
  const double n = static_cast<double>(r.scenes.size());
  for (const auto& s : r.scenes) {
    r.mean.topo.precision += s.metrics.topo.precision;
    r.mean.topo.recall += s.metrics.topo.recall;
    r.mean.topo.f1 += s.metrics.topo.f1;
    r.mean.apls.apls += s.metrics.apls.apls;
  }
  r.mean.topo.precision /= n;
  r.mean.topo.recall /= n;
  r.mean.topo.f1 /= n;
  r.mean.apls.apls /= n;
  return r;
}

namespace {

json metrics_json(const MetricsReport& m) {
  return {{"f1", m.topo.f1}, {"precision", m.topo.precision}, {"recall", m.topo.recall}, {"apls", m.apls.apls}};
}

MetricsReport read_metrics(const json& j) {
  MetricsReport m;
  m.topo.f1 = field<double>(j, "f1");
  m.topo.precision = field<double>(j, "precision");
  m.topo.recall = field<double>(j, "recall");
  m.apls.apls = field<double>(j, "apls");
  return m;
}

}  // namespace

std::string format_report(const EvalReport& report) {
  json scenes = json::array();
  for (const auto& s : report.scenes) {
    json row = metrics_json(s.metrics);
    row["name"] = s.name;
    row["topo_counts"] = {{"seeds", s.metrics.topo.seeds},
                          {"matched_seeds", s.metrics.topo.matched_seeds},
                          {"marbles", s.metrics.topo.marbles},
                          {"holes", s.metrics.topo.holes},
                          {"matched", s.metrics.topo.matched}};
    row["apls_detail"] = {{"gt_to_proposal", s.metrics.apls.gt_to_proposal},
                          {"proposal_to_gt", s.metrics.apls.proposal_to_gt},
                          {"gt_pairs", s.metrics.apls.gt_pairs},
                          {"proposal_pairs", s.metrics.apls.proposal_pairs}};
    scenes.push_back(std::move(row));
  }
  json j;
  j["format"] = "roadgraph-report";
  j["version"] = 1;
  j["scenes"] = std::move(scenes);
  j["mean"] = metrics_json(report.mean);
  return j.dump(2) + "\n";
}

EvalReport parse_report(std::string_view text) {
  const json j = parse_json(text, "report");
  expect_format(j, "roadgraph-report", 1);
  EvalReport r;
  for (const json& row : field<json>(j, "scenes")) {
    SceneMetrics s{field<std::string>(row, "name"), read_metrics(row)};
    if (const auto it = row.find("topo_counts"); it != row.end()) {
      s.metrics.topo.seeds = field<std::size_t>(*it, "seeds");
      s.metrics.topo.matched_seeds = field<std::size_t>(*it, "matched_seeds");
      s.metrics.topo.marbles = field<std::size_t>(*it, "marbles");
      s.metrics.topo.holes = field<std::size_t>(*it, "holes");
      s.metrics.topo.matched = field<std::size_t>(*it, "matched");
    }
    if (const auto it = row.find("apls_detail"); it != row.end()) {
      s.metrics.apls.gt_to_proposal = field<double>(*it, "gt_to_proposal");
      s.metrics.apls.proposal_to_gt = field<double>(*it, "proposal_to_gt");
      s.metrics.apls.gt_pairs = field<std::size_t>(*it, "gt_pairs");
      s.metrics.apls.proposal_pairs = field<std::size_t>(*it, "proposal_pairs");
    }
    r.scenes.push_back(std::move(s));
  }
  r.mean = read_metrics(field<json>(j, "mean"));
  return r;
}

}  // namespace roadgraph
