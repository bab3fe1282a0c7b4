#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "roadgraph/config.hpp"
#include "roadgraph/io.hpp"
#include "roadgraph/mask_ops.hpp"
#include "roadgraph/metrics.hpp"
#include "roadgraph/synth.hpp"

namespace py = pybind11;
using namespace roadgraph;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I64 = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const ProbabilityMask& m) {
  py::array_t<float> out({m.height(), m.width()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::array_t<float> to_numpy(const FeatureMap& f) {
  py::array_t<float> out({f.height(), f.width(), f.channels()});
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

ProbabilityMask mask_from(const F32& a) {
  if (a.ndim() != 2) throw std::invalid_argument("mask must be a 2-D array");
  return ProbabilityMask(int(a.shape(0)), int(a.shape(1)), std::vector<float>(a.data(), a.data() + a.size()));
}

RoadGraph graph_from(const F64& points, const I64& edges, std::pair<int, int> extent) {
  if (points.ndim() != 2 || points.shape(1) != 2) throw std::invalid_argument("points must have shape (n, 2)");
  if (edges.ndim() != 2 || edges.shape(1) != 2) throw std::invalid_argument("edges must have shape (m, 2)");
  std::vector<Point> pts;
  for (py::ssize_t i = 0; i < points.shape(0); ++i) pts.push_back({points.at(i, 0), points.at(i, 1)});
  std::vector<Edge> es;
  for (py::ssize_t i = 0; i < edges.shape(0); ++i) es.push_back({int(edges.at(i, 0)), int(edges.at(i, 1))});
  return build_graph(pts, es, Extent{extent.first, extent.second});
}

py::tuple graph_to(const RoadGraph& g) {
  py::array_t<double> pts({py::ssize_t(g.vertex_count()), py::ssize_t(2)});
  auto p = pts.mutable_unchecked<2>();
  for (std::size_t i = 0; i < g.vertex_count(); ++i) {
    p(i, 0) = g.point(int(i)).x;
    p(i, 1) = g.point(int(i)).y;
  }
  py::array_t<std::int64_t> es({py::ssize_t(g.edge_count()), py::ssize_t(2)});
  auto e = es.mutable_unchecked<2>();
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    e(i, 0) = g.edges()[i].u;
    e(i, 1) = g.edges()[i].v;
  }
  return py::make_tuple(pts, es, py::make_tuple(g.width(), g.height()));
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["precision"] = m.topo.precision;
  d["recall"] = m.topo.recall;
  d["f1"] = m.topo.f1;
  d["apls"] = m.apls.apls;
  d["apls_gt_to_proposal"] = m.apls.gt_to_proposal;
  d["apls_proposal_to_gt"] = m.apls.proposal_to_gt;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Road-graph extraction core";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("load_graph", [](const std::string& path) { return graph_to(load_graph(path).graph); }, py::arg("path"),
        "Returns (points, edges, (width, height)).");
  m.def(
      "save_graph",
      [](const std::string& path, const F64& points, const I64& edges, std::pair<int, int> extent) {
        save_graph(path, graph_from(points, edges, extent));
      },
      py::arg("path"), py::arg("points"), py::arg("edges"), py::arg("extent"));
  m.def(
      "format_graph",
      [](const F64& points, const I64& edges, std::pair<int, int> extent) {
        return format_graph(graph_from(points, edges, extent));
      },
      py::arg("points"), py::arg("edges"), py::arg("extent"));

  m.def(
      "load_raster",
      [](const std::string& path) {
        const RasterData r = decode_raster(read_file(path));
        py::array_t<float> out({py::ssize_t(r.height), py::ssize_t(r.width), py::ssize_t(r.channels)});
        std::copy(r.values.begin(), r.values.end(), out.mutable_data());
        return out;
      },
      py::arg("path"), "Returns an (H, W, C) float32 array.");
  m.def(
      "save_raster",
      [](const std::string& path, const F32& a) {
        if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("raster must be 2-D or 3-D");
        RasterData r{std::uint32_t(a.shape(0)), std::uint32_t(a.shape(1)), a.ndim() == 3 ? std::uint32_t(a.shape(2)) : 1u,
                     std::vector<float>(a.data(), a.data() + a.size())};
        write_file_atomic(path, encode_raster(r));
      },
      py::arg("path"), py::arg("array"));

  m.def(
      "nms",
      [](const F32& mask, double threshold, double radius) {
        std::vector<std::tuple<double, double, float>> out;
        for (const Peak& p : nms_extract(mask_from(mask), NmsConfig{threshold, radius}))
          out.emplace_back(p.point.x, p.point.y, p.value);
        return out;
      },
      py::arg("mask"), py::arg("threshold") = 0.5, py::arg("radius") = 8.0, "Peaks as (x, y, value) in extraction order.");

  m.def(
      "evaluate",
      [](const F64& gt_points, const I64& gt_edges, const F64& points, const I64& edges, std::pair<int, int> extent,
         std::uint64_t seed) {
        const RoadGraph gt = graph_from(gt_points, gt_edges, extent);
        const RoadGraph prop = graph_from(points, edges, extent);
        return metrics_dict(evaluate(gt, prop, TopoConfig{}, AplsConfig{}, seed));
      },
      py::arg("gt_points"), py::arg("gt_edges"), py::arg("points"), py::arg("edges"), py::arg("extent"),
      py::arg("seed") = 0);

  m.def(
      "make_scene",
      [](std::uint64_t seed, int extent, const std::string& style, double warp, int occlusions) {
        SceneSpec spec;
        spec.seed = seed;
        spec.extent = extent;
        spec.style = parse_style(style);
        CorruptionSpec c;
        c.warp = warp;
        c.occlusions = occlusions;
        const SyntheticScene s = make_scene(spec, c);
        py::dict d;
        d["graph"] = graph_to(s.gt);
        d["road"] = to_numpy(s.road);
        d["keypoint"] = to_numpy(s.keypoint);
        d["features"] = to_numpy(s.features);
        return d;
      },
      py::arg("seed") = 0, py::arg("extent") = 256, py::arg("style") = "urban-grid", py::arg("warp") = 0.0,
      py::arg("occlusions") = 0);

  m.def(
      "canonical_config", [](const std::string& text) { return config_to_json(parse_config(text)); },
      py::arg("json") = "{}", "Validates a run configuration and returns it with every default filled in.");
}
