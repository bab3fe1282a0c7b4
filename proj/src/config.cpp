#include "roadgraph/config.hpp"

#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace roadgraph {

using json = nlohmann::json;

std::string to_string(LineMode mode) {
  switch (mode) {
    case LineMode::Extended: return "extended";
    case LineMode::SegmentOnly: return "segment";
    case LineMode::Off: return "off";
  }
  return "unknown";
}

LineMode parse_line_mode(const std::string& name) {
  if (name == "extended") return LineMode::Extended;
  if (name == "segment") return LineMode::SegmentOnly;
  if (name == "off") return LineMode::Off;
  throw ConfigError("unknown line mode '" + name + "' (expected extended, segment or off)");
}

namespace {

/// Reads known keys from one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        fail(key, "an integer in range");
      out = static_cast<int>(x);
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of integers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number_integer()) fail(key, "an array of integers");
        out.push_back(x.get<int>());
      }
    }
  }
  void get(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) fail(key, "an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  void get(const char* key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of strings");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_string()) fail(key, "an array of strings");
        out.push_back(x.get<std::string>());
      }
    }
  }
  template <class F>
  void section(const char* key, F&& fn) {
    if (const json* v = find(key)) {
      Reader sub(*v, path_.empty() ? key : path_ + "." + key);
      fn(sub);
      sub.finish();
    }
  }
  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!used_.count(k)) throw ConfigError("unknown configuration key '" + prefix() + k + "'");
  }

 private:
  const json* find(const char* key) {
    used_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError("configuration key '" + prefix() + key + "' must be " + expected);
  }
  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }
  std::string where() const { return path_.empty() ? "configuration" : "configuration key '" + path_ + "'"; }

  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

void read_training(Reader& r, TrainingConfig& t) {
  r.get("patch_size", t.patch_size);
  r.get("patch_stride", t.patch_stride);
  r.get("sources", t.sampler.sources);
  r.get("gather_radius", t.sampler.gather_radius);
  r.get("resample_radius", t.sampler.resample_radius);
  r.get("positive_budget", t.sampler.positive_budget);
  r.get("channels", t.layout.channels);
  r.get("patch_extent", t.layout.patch_extent);
  std::string mode = to_string(t.layout.line);
  r.get("line_mode", mode);
  t.layout.line = parse_line_mode(mode);
  r.get("extension", t.layout.extension);
  r.get("line_width", t.layout.line_width);
  r.get("n", t.layout.n);
  r.get("m", t.layout.m);
  r.get("hidden", t.hidden);
  r.get("learning_rate", t.learning_rate);
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("resample", t.resample);
}

json training_json(const TrainingConfig& t, bool with_epochs) {
  json j;
  j["patch_size"] = t.patch_size;
  j["patch_stride"] = t.patch_stride;
  j["sources"] = t.sampler.sources;
  j["gather_radius"] = t.sampler.gather_radius;
  j["resample_radius"] = t.sampler.resample_radius;
  j["positive_budget"] = t.sampler.positive_budget;
  j["channels"] = t.layout.channels;
  j["patch_extent"] = t.layout.patch_extent;
  j["line_mode"] = to_string(t.layout.line);
  j["extension"] = t.layout.extension;
  j["line_width"] = t.layout.line_width;
  j["n"] = t.layout.n;
  j["m"] = t.layout.m;
  j["hidden"] = t.hidden;
  j["learning_rate"] = t.learning_rate;
  if (with_epochs) j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["resample"] = t.resample;
  return j;
}

void read_corruption(Reader& r, CorruptionSpec& c) {
  r.get("occlusions", c.occlusions);
  r.get("occlusion_min", c.occlusion_min);
  r.get("occlusion_max", c.occlusion_max);
  r.get("warp", c.warp);
  r.get("noise", c.noise);
  r.get("blur", c.blur);
}

json corruption_json(const CorruptionSpec& c) {
  return {{"occlusions", c.occlusions}, {"occlusion_min", c.occlusion_min},
          {"occlusion_max", c.occlusion_max}, {"warp", c.warp},
          {"noise", c.noise}, {"blur", c.blur}};
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  try {
    training.validate();
    inference.validate();
    topo.validate();
    apls.validate();
    benchmark.base.validate();
    benchmark.corruption.validate();
    benchmark.test_out_corruption.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  if (training.patch_size != inference.patch_size || training.patch_stride != inference.patch_stride)
    throw ConfigError("invalid configuration: training and inference patch plans differ");
  if (threshold_grid.empty()) throw ConfigError("invalid configuration: threshold_grid is empty");
  for (double t : threshold_grid)
    if (!(t > 0.0 && t < 1.0))
      throw ConfigError("invalid configuration: threshold_grid values must lie in (0,1)");
  if (counts.train < 1 || counts.val < 1 || counts.test_in < 1 || counts.test_out < 1)
    throw ConfigError("invalid configuration: every split needs at least one scene");
  if (benchmark.train_styles.empty())
    throw ConfigError("invalid configuration: synth.train_styles is empty");
  for (SceneStyle s : benchmark.train_styles)
    if (s == benchmark.test_out_style)
      throw ConfigError("invalid configuration: test_out_style must differ from every train style");
  for (const CorruptionSpec* c : {&benchmark.corruption, &benchmark.test_out_corruption})
    if (c->warp > training.sampler.resample_radius)
      std::clog << "roadgraph: warning: warp " << c->warp << " px exceeds the resample radius "
                << training.sampler.resample_radius << " px\n";
}

RunConfig parse_config(std::string_view json_text) {
  const json doc = parse_document(json_text);
  RunConfig cfg;
  Reader r(doc, "");
  read_training(r, cfg.training);
  cfg.inference.patch_size = cfg.training.patch_size;
  cfg.inference.patch_stride = cfg.training.patch_stride;
  r.get("r1", cfg.inference.r1);
  r.get("r2", cfg.inference.r2);
  r.get("merge_distance", cfg.inference.merge_distance);
  r.get("pair_radius", cfg.inference.pair_radius);
  r.get("drop_isolated", cfg.inference.drop_isolated);
  r.get("t1", cfg.inference.thresholds.t1);
  r.get("t2", cfg.inference.thresholds.t2);
  r.get("t3", cfg.inference.thresholds.t3);
  r.get("threshold_grid", cfg.threshold_grid);
  r.section("topo", [&](Reader& s) {
    s.get("seed_interval", cfg.topo.seed_interval);
    s.get("propagation", cfg.topo.propagation);
    s.get("marker_spacing", cfg.topo.marker_spacing);
    s.get("match_radius", cfg.topo.match_radius);
  });
  r.section("apls", [&](Reader& s) {
    s.get("snap_radius", cfg.apls.snap_radius);
    s.get("max_pairs", cfg.apls.max_pairs);
    s.get("injection_interval", cfg.apls.injection_interval);
  });
  r.section("synth", [&](Reader& s) {
    SceneSpec& b = cfg.benchmark.base;
    s.get("extent", b.extent);
    s.get("road_width", b.road_width);
    s.get("junction_density", b.junction_density);
    s.get("jitter", b.jitter);
    s.get("diagonal_probability", b.diagonal_probability);
    s.get("drop_probability", b.drop_probability);
    s.get("margin", b.margin);
    s.get("min_separation", b.min_separation);
    s.get("node_spacing", b.node_spacing);
    std::vector<std::string> styles;
    for (SceneStyle st : cfg.benchmark.train_styles) styles.push_back(to_string(st));
    s.get("train_styles", styles);
    std::string out_style = to_string(cfg.benchmark.test_out_style);
    s.get("test_out_style", out_style);
    try {
      cfg.benchmark.train_styles.clear();
      for (const auto& name : styles) cfg.benchmark.train_styles.push_back(parse_style(name));
      cfg.benchmark.test_out_style = parse_style(out_style);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("configuration key 'synth': ") + e.what());
    }
    s.section("counts", [&](Reader& c) {
      c.get("train", cfg.counts.train);
      c.get("val", cfg.counts.val);
      c.get("test_in", cfg.counts.test_in);
      c.get("test_out", cfg.counts.test_out);
    });
    s.section("corruption", [&](Reader& c) { read_corruption(c, cfg.benchmark.corruption); });
    s.section("test_out_corruption",
              [&](Reader& c) { read_corruption(c, cfg.benchmark.test_out_corruption); });
  });
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string config_to_json(const RunConfig& cfg) {
  json j = training_json(cfg.training, true);
  j["r1"] = cfg.inference.r1;
  j["r2"] = cfg.inference.r2;
  j["merge_distance"] = cfg.inference.merge_distance;
  j["pair_radius"] = cfg.inference.pair_radius;
  j["drop_isolated"] = cfg.inference.drop_isolated;
  j["t1"] = cfg.inference.thresholds.t1;
  j["t2"] = cfg.inference.thresholds.t2;
  j["t3"] = cfg.inference.thresholds.t3;
  j["threshold_grid"] = cfg.threshold_grid;
  j["topo"] = {{"seed_interval", cfg.topo.seed_interval},
               {"propagation", cfg.topo.propagation},
               {"marker_spacing", cfg.topo.marker_spacing},
               {"match_radius", cfg.topo.match_radius}};
  j["apls"] = {{"snap_radius", cfg.apls.snap_radius},
               {"max_pairs", cfg.apls.max_pairs},
               {"injection_interval", cfg.apls.injection_interval}};
  const SceneSpec& b = cfg.benchmark.base;
  json styles = json::array();
  for (SceneStyle st : cfg.benchmark.train_styles) styles.push_back(to_string(st));
  j["synth"] = {{"extent", b.extent},
                {"road_width", b.road_width},
                {"junction_density", b.junction_density},
                {"jitter", b.jitter},
                {"diagonal_probability", b.diagonal_probability},
                {"drop_probability", b.drop_probability},
                {"margin", b.margin},
                {"min_separation", b.min_separation},
                {"node_spacing", b.node_spacing},
                {"train_styles", styles},
                {"test_out_style", to_string(cfg.benchmark.test_out_style)},
                {"counts",
                 {{"train", cfg.counts.train},
                  {"val", cfg.counts.val},
                  {"test_in", cfg.counts.test_in},
                  {"test_out", cfg.counts.test_out}}},
                {"corruption", corruption_json(cfg.benchmark.corruption)},
                {"test_out_corruption", corruption_json(cfg.benchmark.test_out_corruption)}};
  return j.dump(2) + "\n";
}

std::string training_config_json(const TrainingConfig& training) {
  return training_json(training, true).dump();
}

TrainingConfig parse_training_config(std::string_view json_text) {
  const json doc = parse_document(json_text);
  TrainingConfig t;
  Reader r(doc, "training");
  read_training(r, t);
  r.finish();
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid training configuration: ") + e.what());
  }
  return t;
}

std::uint64_t config_hash(const TrainingConfig& training) {
  // Epoch count is excluded so a resumed run may train for a different number of epochs.
  const std::string text = training_json(training, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace roadgraph
