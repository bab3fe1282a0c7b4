#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "oracles.hpp"
#include "roadgraph/graph.hpp"

using namespace roadgraph;

TEST_CASE("build_graph basics") {
  const std::vector<Point> pts{{0, 0}, {3, 4}};
  const std::vector<Edge> one{{0, 1}};
  const RoadGraph g = build_graph(pts, one, {10, 10});
  CHECK(g.vertex_count() == 2);
  CHECK(g.edge_count() == 1);
  CHECK(g.node(0).degree == 1);
  CHECK(g.node(1).degree == 1);
  CHECK(g.edge_length(0) == doctest::Approx(5.0));

  const std::vector<RawVertex> rv{{10, 0, 0}, {20, 3, 4}};
  const std::vector<RawEdge> dup{{10, 20}, {20, 10}};
  const RoadGraph d = build_graph(rv, dup, {10, 10});
  CHECK(d.edge_count() == 1);
  CHECK(d.edges()[0] == Edge{0, 1});
}

TEST_CASE("build_graph rejects invalid input") {
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const GraphError& e) {
      return std::optional<GraphError::Kind>(e.kind());
    }
    return std::optional<GraphError::Kind>();
  };
  const Extent ext{10, 10};
  CHECK(kind_of([&] {
          std::vector<RawVertex> v{{1, 0, 0}, {1, 1, 1}};
          build_graph(v, std::vector<RawEdge>{}, ext);
        }) == GraphError::Kind::DuplicateId);
  CHECK(kind_of([&] {
          std::vector<RawVertex> v{{1, 10, 0}};
          build_graph(v, std::vector<RawEdge>{}, ext);
        }) == GraphError::Kind::OutOfExtent);
  CHECK(kind_of([&] {
          std::vector<RawVertex> v{{1, std::nan(""), 0}};
          build_graph(v, std::vector<RawEdge>{}, ext);
        }) == GraphError::Kind::NonFiniteCoordinate);
  CHECK(kind_of([&] {
          std::vector<RawVertex> v{{1, 0, 0}};
          build_graph(v, std::vector<RawEdge>{{1, 2}}, ext);
        }) == GraphError::Kind::UnknownVertex);
  CHECK(kind_of([&] {
          std::vector<RawVertex> v{{1, 0, 0}};
          build_graph(v, std::vector<RawEdge>{{1, 1}}, ext);
        }) == GraphError::Kind::SelfLoop);
  CHECK(kind_of([&] {
          build_graph(std::vector<RawVertex>{}, std::vector<RawEdge>{}, Extent{-1, 5});
        }) == GraphError::Kind::BadExtent);
}

TEST_CASE("degree sum equals twice the edge count") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RoadGraph g = oracle::random_graph(100, 200, {256, 256}, seed);
    std::set<std::pair<int, int>> unique;
    for (const Edge& e : g.edges()) unique.insert({e.u, e.v});
    CHECK(unique.size() == g.edge_count());
    int sum = 0;
    std::vector<int> recount(g.vertex_count(), 0);
    for (const Edge& e : g.edges()) {
      CHECK(e.u < e.v);
      ++recount[std::size_t(e.u)];
      ++recount[std::size_t(e.v)];
    }
    for (const Node& n : g.nodes()) {
      sum += n.degree;
      CHECK(n.degree == recount[std::size_t(n.id)]);
    }
    CHECK(sum == 2 * int(g.edge_count()));
  }
}

TEST_CASE("nodes_within matches a brute-force scan") {
  CHECK(nodes_within(RoadGraph{}, {1, 1}, 5).empty());
  const RoadGraph g = oracle::random_graph(500, 0, {256, 256}, 7);
  const auto at = nodes_within(g, g.point(3), 0.0);
  REQUIRE(at.size() == 1);
  CHECK(at[0].id == 3);

  Rng rng(11);
  for (int q = 0; q < 1000; ++q) {
    const Point c{rng.uniform(-20, 276), rng.uniform(-20, 276)};
    const double radius = q % 2 ? 16.0 : rng.uniform(0, 60);
    std::vector<std::pair<double, int>> brute;
    for (const Node& n : g.nodes()) {
      const double d = distance(c, n.point());
      if (d <= radius) brute.push_back({d, n.id});
    }
    std::sort(brute.begin(), brute.end());
    const auto got = nodes_within(g, c, radius);
    REQUIRE(got.size() == brute.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == brute[i].second);
  }
}

TEST_CASE("shortest paths") {
  const std::vector<Point> path{{0, 0}, {1, 0}, {2, 0}};
  const std::vector<Edge> pe{{0, 1}, {1, 2}};
  const RoadGraph p = build_graph(path, pe, {4, 4});
  CHECK(*shortest_path_length(p, 0, 0) == 0.0);
  CHECK(*shortest_path_length(p, 0, 2) == doctest::Approx(2.0));

  const std::vector<Point> two{{0, 0}, {1, 0}};
  CHECK_FALSE(shortest_path_length(build_graph(two, std::vector<Edge>{}, {4, 4}), 0, 1).has_value());

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RoadGraph g = oracle::random_graph(50, 70, {128, 128}, 100 + seed);
    const auto fw = oracle::all_pairs(g);
    for (int a = 0; a < 50; ++a) {
      const auto row = shortest_path_lengths(g, a);
      for (int b = 0; b < 50; ++b) {
        const auto sp = shortest_path_length(g, a, b);
        if (std::isinf(fw[a][b])) {
          CHECK_FALSE(sp.has_value());
          CHECK(std::isinf(row[b]));
        } else {
          REQUIRE(sp.has_value());
          CHECK(*sp == doctest::Approx(fw[a][b]).epsilon(1e-12));
          CHECK(row[b] == doctest::Approx(fw[a][b]).epsilon(1e-12));
          CHECK(*sp == doctest::Approx(*shortest_path_length(g, b, a)).epsilon(1e-12));
        }
      }
    }
    // Triangle inequality on reachable triples.
    for (int a = 0; a < 50; a += 7)
      for (int b = 0; b < 50; b += 5)
        for (int c = 0; c < 50; c += 3)
          if (!std::isinf(fw[a][b]) && !std::isinf(fw[b][c])) CHECK(fw[a][c] <= fw[a][b] + fw[b][c] + 1e-9);
  }
}

TEST_CASE("bounded shortest paths cut off beyond the bound") {
  const RoadGraph g = oracle::random_graph(60, 90, {128, 128}, 3);
  const auto full = oracle::dijkstra(g, 0);
  const auto bounded = shortest_path_lengths(g, 0, 40.0);
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i] <= 40.0)
      CHECK(bounded[i] == doctest::Approx(full[i]).epsilon(1e-12));
    else
      CHECK(std::isinf(bounded[i]));
  }
}

TEST_CASE("connected components") {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {5, 5}, {6, 5}, {9, 9}};
  const std::vector<Edge> es{{0, 1}, {2, 3}};
  const auto cc = connected_components(build_graph(pts, es, {10, 10}));
  CHECK(cc == std::vector<int>{0, 0, 1, 1, 2});
}

TEST_CASE("simplify_graph") {
  SUBCASE("path collapses to one edge") {
    const std::vector<Point> path{{0, 0}, {1, 0}, {2, 0}};
    const std::vector<Edge> pe{{0, 1}, {1, 2}};
    const SimplifiedGraph s = simplify_graph(build_graph(path, pe, {4, 4}));
    CHECK(s.vertex_count() == 2);
    REQUIRE(s.edges().size() == 1);
    CHECK(s.edges()[0].length == doctest::Approx(2.0));
    CHECK(s.retained()[std::size_t(s.edges()[0].u)] == 0);
    CHECK(s.retained()[std::size_t(s.edges()[0].v)] == 2);
  }
  SUBCASE("4-cycle keeps one anchor and a loop") {
    const std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const std::vector<Edge> se{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
    const SimplifiedGraph s = simplify_graph(build_graph(sq, se, {4, 4}));
    CHECK(s.vertex_count() == 1);
    REQUIRE(s.edges().size() == 1);
    CHECK(s.edges()[0].u == s.edges()[0].v);
    CHECK(s.edges()[0].length == doctest::Approx(4.0));
  }
  SUBCASE("subdivided grids keep length and retained distances") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SceneSpec spec;
      spec.seed = seed;
      spec.extent = 192;
      const RoadGraph g = generate_graph(spec);
      const SimplifiedGraph s = simplify_graph(g);
      CHECK(std::abs(s.total_length() - g.total_length()) <= 1e-9 * g.total_length());
      const auto fw = oracle::all_pairs(g);
      for (std::size_t a = 0; a < s.vertex_count(); a += 3)
        for (std::size_t b = 0; b < s.vertex_count(); b += 2) {
          const double want = fw[std::size_t(s.retained()[a])][std::size_t(s.retained()[b])];
          const auto got = s.shortest_path_length(int(a), int(b));
          if (std::isinf(want)) {
            CHECK_FALSE(got.has_value());
          } else {
            REQUIRE(got.has_value());
            CHECK(std::abs(*got - want) <= 1e-6 * std::max(1.0, want));
          }
        }
    }
  }
}

TEST_CASE("spatial index with negative and far coordinates") {
  const std::vector<Point> pts{{-100, -100}, {0, 0}, {1000, 5}, {15.9, 0}};
  const SpatialIndex idx(pts, 16.0);
  auto got = idx.query({0, 0}, 16.0);
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<int>{1, 3});
  CHECK(idx.query({500, 500}, 10).empty());
}
