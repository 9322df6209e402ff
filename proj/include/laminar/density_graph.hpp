#pragma once

#include "laminar/common.hpp"
#include "laminar/metric_field.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace laminar {

struct Neighbor {
  Index index;
  double distance_sq;
};

/// Exact Euclidean k-nearest-neighbour search over a fixed point set.
/// Median splits on the widest axis; leaves hold up to leaf_size points.
/// Results are ordered by (distance, index), so equidistant candidates
/// resolve to the lower index.
class KdTree {
 public:
  explicit KdTree(RowMatrix points, int leaf_size = 16);

  // k nearest points to q, skipping the point whose index equals `exclude`.
  std::vector<Neighbor> query(const Eigen::Ref<const Vector>& q, Index k, Index exclude = -1) const;

  Index size() const { return points_.rows(); }
  const RowMatrix& points() const { return points_; }

 private:
  struct Node {
    Index begin = 0;
    Index end = 0;
    int left = -1;
    int right = -1;
    Vector lo;
    Vector hi;
  };

  int build(Index begin, Index end);
  void search(int node, const Eigen::Ref<const Vector>& q, Index k, Index exclude, std::vector<Neighbor>& heap) const;

  RowMatrix points_;
  int leaf_size_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// For every row, its k nearest other rows (N x k). Requires k < N.
IndexMatrix knn(const RowMatrix& pseudo_cdf, Index k);

struct Edge {
  Index to;
  double weight;
};

struct DensityGraph {
  Index k = 0;
  std::vector<std::vector<Edge>> adjacency;  // sorted by target index

  Index node_count() const { return static_cast<Index>(adjacency.size()); }
  Index edge_count() const;  // undirected edges
};

// Union-symmetrized kNN graph from pseudo-cdf neighbours, weighted by the
// local Mahalanobis distance between data-space points.
DensityGraph build_graph(const RowMatrix& data, const RowMatrix& pseudo_cdf, const MetricTensorField& field, Index k);

// Same construction with a caller-supplied neighbour table and edge weight.
template <class Weight>
DensityGraph graph_from_neighbors(const IndexMatrix& neighbors, Weight&& weight);

struct DistanceResult {
  Index source = 0;
  std::vector<double> distances;  // +inf marks unreachable nodes
  std::vector<Index> predecessors;  // -1 for the source and unreachable nodes

  bool reachable(Index i) const { return distances[static_cast<std::size_t>(i)] < std::numeric_limits<double>::infinity(); }
  std::vector<Index> path_to(Index target) const;
};

DistanceResult shortest_paths(const DensityGraph& graph, Index source);

struct DistanceMatrix {
  std::vector<Index> sources;
  RowMatrix values;  // |sources| x N, +inf where unreachable

  bool reachable(Index row, Index col) const { return values(row, col) < std::numeric_limits<double>::infinity(); }
  Index unreachable_count() const;
};

DistanceMatrix distance_matrix(const DensityGraph& graph, std::span<const Index> sources, int threads = 1);
DistanceMatrix distance_matrix(const DensityGraph& graph, int threads = 1);

// Throws ConnectivityError (advising a larger k) when any pair is unreachable.
void require_connected(const DistanceMatrix& matrix);

// Component id per node, numbered in order of first appearance.
std::vector<int> connected_components(const DensityGraph& graph);
std::vector<Index> component_sizes(const DensityGraph& graph);

RowMatrix euclidean_distance_matrix(const RowMatrix& points);

// Binary layout (little-endian):
//   8 bytes magic "LAMDIST\0", u32 version (1), u64 rows, u64 cols,
//   u64 x rows source indices, f64 x rows*cols values (row-major, +inf when
//   unreachable), ceil(rows*cols/8) bytes unreachable bitmap (bit i of the
//   row-major cell order, least significant bit first).
std::vector<unsigned char> serialize_distances(const DistanceMatrix& matrix);
DistanceMatrix deserialize_distances(std::span<const unsigned char> bytes);
void save_distances(const std::filesystem::path& path, const DistanceMatrix& matrix);
DistanceMatrix load_distances(const std::filesystem::path& path);
// Header "source,d0,...,d{N-1}"; unreachable cells are written as "inf".
std::string distances_to_csv(const DistanceMatrix& matrix);

std::string graph_edges_to_csv(const DensityGraph& graph);

template <class Weight>
DensityGraph graph_from_neighbors(const IndexMatrix& neighbors, Weight&& weight) {
  const Index n = neighbors.rows();
  DensityGraph g;
  g.k = neighbors.cols();
  g.adjacency.assign(static_cast<std::size_t>(n), {});
  std::vector<std::vector<Index>> targets(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < neighbors.cols(); ++c) {
      const Index j = neighbors(i, c);
      targets[static_cast<std::size_t>(i)].push_back(j);
      targets[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  for (Index i = 0; i < n; ++i) {
    auto& t = targets[static_cast<std::size_t>(i)];
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j : targets[static_cast<std::size_t>(i)]) {
      if (j < i) continue;  // weight computed once per unordered pair
      const double w = weight(i, j);
      g.adjacency[static_cast<std::size_t>(i)].push_back({j, w});
      g.adjacency[static_cast<std::size_t>(j)].push_back({i, w});
    }
  }
  for (auto& adj : g.adjacency) {
    std::sort(adj.begin(), adj.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
  }
  return g;
}

}  // namespace laminar
