#include "laminar/density_graph.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace laminar;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DensityGraph graph_from_dense(const Matrix& w) {
  DensityGraph g;
  g.adjacency.resize(static_cast<std::size_t>(w.rows()));
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      if (i != j && std::isfinite(w(i, j))) g.adjacency[static_cast<std::size_t>(i)].push_back({j, w(i, j)});
    }
  }
  return g;
}

DensityGraph path_graph() {
  Matrix w = Matrix::Constant(3, 3, kInf);
  w(0, 1) = w(1, 0) = 1.0;
  w(1, 2) = w(2, 1) = 2.0;
  return graph_from_dense(w);
}

RowMatrix random_points(Rng& rng, Index n, int d) {
  RowMatrix p(n, d);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) p(i, j) = rng.normal();
  }
  return p;
}

MetricTensorField identity_field(const RowMatrix& pts) {
  MetricTensorField f;
  f.points = pts;
  f.tensors.assign(static_cast<std::size_t>(pts.rows()), Matrix::Identity(pts.cols(), pts.cols()));
  f.regularized.assign(static_cast<std::size_t>(pts.rows()), false);
  return f;
}

}  // namespace

TEST_CASE("knn on three collinear points") {
  RowMatrix p(3, 1);
  p << 0.0, 1.0, 3.0;
  const IndexMatrix nn = knn(p, 1);
  CHECK(nn(0, 0) == 1);
  CHECK(nn(1, 0) == 0);
  CHECK(nn(2, 0) == 1);
  CHECK_THROWS_AS(knn(p, 3), InputError);
}

TEST_CASE("knn matches brute force and breaks ties by index") {
  Rng rng(1);
  for (int d : {1, 2, 3}) {
    const RowMatrix p = random_points(rng, 500, d);
    const IndexMatrix nn = knn(p, 12);
    const auto ref = laminar::testing::brute_knn(p, 12);
    for (Index i = 0; i < p.rows(); ++i) {
      for (Index c = 0; c < 12; ++c) CHECK(nn(i, c) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
    }
  }
  // A lattice has many exact ties.
  RowMatrix grid(100, 2);
  for (Index i = 0; i < 100; ++i) grid.row(i) << static_cast<double>(i % 10), static_cast<double>(i / 10);
  const IndexMatrix nn = knn(grid, 8);
  const auto ref = laminar::testing::brute_knn(grid, 8);
  for (Index i = 0; i < 100; ++i) {
    for (Index c = 0; c < 8; ++c) {
      CHECK(nn(i, c) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
      CHECK(nn(i, c) != i);
    }
  }
}

TEST_CASE("kd-tree handles duplicate points") {
  RowMatrix p = RowMatrix::Zero(40, 2);
  p(39, 0) = 1.0;
  const IndexMatrix nn = knn(p, 3);
  CHECK(nn(0, 0) == 1);
  CHECK(nn(0, 2) == 3);
  CHECK(nn(39, 0) == 0);
}

TEST_CASE("build_graph with identity tensors weights edges by euclidean length") {
  Rng rng(2);
  const RowMatrix p = random_points(rng, 120, 2);
  const Index k = 5;
  const DensityGraph g = build_graph(p, p, identity_field(p), k);
  CHECK(g.edge_count() >= 120 * k / 2);
  CHECK(g.edge_count() <= 120 * k);
  const IndexMatrix nn = knn(p, k);
  for (Index i = 0; i < 120; ++i) {
    for (const Edge& e : g.adjacency[static_cast<std::size_t>(i)]) {
      CHECK(e.weight == doctest::Approx((p.row(i) - p.row(e.to)).norm()).epsilon(1e-14));
      CHECK(e.weight > 0.0);
      // Undirected with identical weights.
      bool found = false;
      for (const Edge& back : g.adjacency[static_cast<std::size_t>(e.to)]) {
        if (back.to == i) {
          found = true;
          CHECK(back.weight == e.weight);
        }
      }
      CHECK(found);
      // Union rule.
      bool listed = false;
      for (Index c = 0; c < k; ++c) listed = listed || nn(i, c) == e.to || nn(e.to, c) == i;
      CHECK(listed);
    }
  }
}

TEST_CASE("two far apart blobs with small k stay disconnected") {
  Rng rng(3);
  RowMatrix p = random_points(rng, 100, 2) * 0.5;
  p.bottomRows(50).array() += 100.0;
  const DensityGraph g = build_graph(p, p, identity_field(p), 3);
  const auto sizes = component_sizes(g);
  CHECK(sizes.size() >= 2);
  const DistanceMatrix d = distance_matrix(g);
  CHECK(d.unreachable_count() > 0);
  CHECK_FALSE(d.reachable(0, 99));
  CHECK(std::isinf(d.values(0, 99)));
  CHECK_THROWS_AS(require_connected(d), ConnectivityError);
}

TEST_CASE("shortest paths on a path graph") {
  const DensityGraph g = path_graph();
  const DistanceResult r = shortest_paths(g, 0);
  CHECK(r.distances == std::vector<double>{0.0, 1.0, 3.0});
  CHECK(r.path_to(2) == std::vector<Index>{0, 1, 2});
  const DistanceMatrix m = distance_matrix(g);
  RowMatrix want(3, 3);
  want << 0, 1, 3, 1, 0, 2, 3, 2, 0;
  CHECK(m.values == want);
  require_connected(m);
}

TEST_CASE("isolated node is unreachable") {
  Matrix w = Matrix::Constant(3, 3, kInf);
  w(0, 1) = w(1, 0) = 1.0;
  const DistanceResult r = shortest_paths(graph_from_dense(w), 0);
  CHECK_FALSE(r.reachable(2));
  CHECK(r.predecessors[2] == -1);
  CHECK(r.path_to(2).empty());
}

TEST_CASE("dijkstra equals floyd-warshall on random graphs") {
  // Integer weights keep every path sum exact, so any summation order agrees
  // and equality must be bitwise. Real weights only agree to rounding.
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const bool integral = trial % 2 == 0;
    const Index n = 2 + static_cast<Index>(rng.below(49));
    const double density = rng.uniform(0.05, 0.6);
    Matrix w = Matrix::Constant(n, n, kInf);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (rng.uniform() >= density) continue;
        w(i, j) = w(j, i) = integral ? static_cast<double>(1 + rng.below(20)) : rng.uniform(0.01, 5.0);
      }
    }
    const Matrix fw = laminar::testing::floyd_warshall(w);
    const DistanceMatrix dm = distance_matrix(graph_from_dense(w), 3);
    double worst = 0.0;
    bool same_reach = true;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        same_reach = same_reach && (std::isinf(fw(i, j)) == std::isinf(dm.values(i, j)));
        if (std::isfinite(fw(i, j))) worst = std::max(worst, std::abs(dm.values(i, j) - fw(i, j)) / std::max(fw(i, j), 1.0));
      }
    }
    CHECK(same_reach);
    if (integral) {
      CHECK(worst == 0.0);
      CHECK(dm.values == dm.values.transpose());
    } else {
      CHECK(worst < 1e-14);
    }
    const DistanceResult single = shortest_paths(graph_from_dense(w), n - 1);
    for (Index j = 0; j < n; ++j) CHECK(single.distances[static_cast<std::size_t>(j)] == dm.values(n - 1, j));
  }
}

TEST_CASE("identity tensors with a complete graph give euclidean distances") {
  Rng rng(5);
  const RowMatrix p = random_points(rng, 60, 3);
  const DensityGraph g = build_graph(p, p, identity_field(p), 59);
  const DistanceMatrix d = distance_matrix(g, 2);
  const RowMatrix e = euclidean_distance_matrix(p);
  CHECK((d.values - e).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("metric axioms on a connected graph") {
  Rng rng(6);
  const RowMatrix p = random_points(rng, 80, 2);
  const DistanceMatrix d = distance_matrix(build_graph(p, p, identity_field(p), 6));
  require_connected(d);
  for (int trial = 0; trial < 2000; ++trial) {
    const Index i = static_cast<Index>(rng.below(80)), j = static_cast<Index>(rng.below(80)),
                l = static_cast<Index>(rng.below(80));
    CHECK(d.values(i, i) == 0.0);
    CHECK(std::abs(d.values(i, j) - d.values(j, i)) <= 1e-14 * d.values(i, j));
    CHECK(d.values(i, j) <= d.values(i, l) + d.values(l, j) + 1e-12);
  }
}

TEST_CASE("distance matrix for a subset of sources") {
  const DensityGraph g = path_graph();
  const std::vector<Index> src{2, 0};
  const DistanceMatrix m = distance_matrix(g, src);
  CHECK(m.sources == src);
  CHECK(m.values(0, 0) == 3.0);
  CHECK(m.values(1, 2) == 3.0);
  const std::vector<Index> bad{5};
  CHECK_THROWS_AS(distance_matrix(g, bad), InputError);
}

TEST_CASE("distance files round trip, including unreachable cells") {
  Matrix w = Matrix::Constant(4, 4, kInf);
  w(0, 1) = w(1, 0) = 0.1;
  w(2, 3) = w(3, 2) = 1.0 / 3.0;
  const DistanceMatrix m = distance_matrix(graph_from_dense(w));
  const auto bytes = serialize_distances(m);
  const DistanceMatrix back = deserialize_distances(bytes);
  CHECK(back.sources == m.sources);
  CHECK(back.values == m.values);
  CHECK(back.unreachable_count() == 8);

  const auto path = std::filesystem::temp_directory_path() / "laminar_test_distances.bin";
  save_distances(path, m);
  CHECK(load_distances(path).values == m.values);
  std::filesystem::remove(path);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(deserialize_distances(truncated), IoError);

  const std::string csv = distances_to_csv(m);
  CHECK(csv.rfind("source,d0,d1,d2,d3\n", 0) == 0);
  CHECK(csv.find("0,0,0.1,inf,inf\n") != std::string::npos);
  CHECK(graph_edges_to_csv(graph_from_dense(w)) == "i,j,weight\n0,1,0.1\n2,3,0.3333333333333333\n");
}
