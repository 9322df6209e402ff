#include "laminar/density_graph.hpp"

#include "laminar/io.hpp"
#include "laminar/parallel.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <queue>
#include <string>

namespace laminar {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance_sq < b.distance_sq || (a.distance_sq == b.distance_sq && a.index < b.index);
}

double box_distance_sq(const Eigen::Ref<const Vector>& q, const Vector& lo, const Vector& hi) {
  double acc = 0.0;
  for (Index j = 0; j < q.size(); ++j) {
    double gap = 0.0;
    if (q(j) < lo(j)) gap = lo(j) - q(j);
    else if (q(j) > hi(j)) gap = q(j) - hi(j);
    acc += gap * gap;
  }
  return acc;
}

}  // namespace

KdTree::KdTree(RowMatrix points, int leaf_size) : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  if (points_.rows() > 0) build(0, points_.rows());
}

int KdTree::build(Index begin, Index end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Node node;
  node.begin = begin;
  node.end = end;
  const Index d = points_.cols();
  node.lo = Vector::Constant(d, std::numeric_limits<double>::infinity());
  node.hi = Vector::Constant(d, -std::numeric_limits<double>::infinity());
  for (Index i = begin; i < end; ++i) {
    const auto p = points_.row(order_[static_cast<std::size_t>(i)]).transpose();
    node.lo = node.lo.cwiseMin(p);
    node.hi = node.hi.cwiseMax(p);
  }
  if (end - begin > leaf_size_) {
    Index axis = 0;
    (node.hi - node.lo).maxCoeff(&axis);
    if (node.hi(axis) > node.lo(axis)) {
      const Index mid = begin + (end - begin) / 2;
      auto first = order_.begin() + begin;
      std::nth_element(first, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
        const double va = points_(a, axis);
        const double vb = points_(b, axis);
        return va < vb || (va == vb && a < b);
      });
      node.left = build(begin, mid);
      node.right = build(mid, end);
    }
  }
  nodes_[static_cast<std::size_t>(id)] = std::move(node);
  return id;
}

void KdTree::search(int id, const Eigen::Ref<const Vector>& q, Index k, Index exclude,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  const bool full = static_cast<Index>(heap.size()) == k;
  // Equality is not pruned: an equidistant point with a lower index may still win.
  if (full && box_distance_sq(q, node.lo, node.hi) > heap.front().distance_sq) return;
  if (node.left < 0) {
    for (Index i = node.begin; i < node.end; ++i) {
      const Index idx = order_[static_cast<std::size_t>(i)];
      if (idx == exclude) continue;
      const Neighbor cand{idx, (points_.row(idx).transpose() - q).squaredNorm()};
      if (static_cast<Index>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const Node& l = nodes_[static_cast<std::size_t>(node.left)];
  const Node& r = nodes_[static_cast<std::size_t>(node.right)];
  const double dl = box_distance_sq(q, l.lo, l.hi);
  const double dr = box_distance_sq(q, r.lo, r.hi);
  if (dl <= dr) {
    search(node.left, q, k, exclude, heap);
    search(node.right, q, k, exclude, heap);
  } else {
    search(node.right, q, k, exclude, heap);
    search(node.left, q, k, exclude, heap);
  }
}

std::vector<Neighbor> KdTree::query(const Eigen::Ref<const Vector>& q, Index k, Index exclude) const {
  if (q.size() != points_.cols()) throw InputError("query dimension does not match the tree");
  std::vector<Neighbor> heap;
  if (k <= 0 || nodes_.empty()) return heap;
  heap.reserve(static_cast<std::size_t>(k));
  search(0, q, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

IndexMatrix knn(const RowMatrix& pseudo_cdf, Index k) {
  const Index n = pseudo_cdf.rows();
  if (k < 1) throw InputError("k must be positive");
  if (k >= n) {
    throw InputError("k = " + std::to_string(k) + " requires more than " + std::to_string(k) + " points, got " +
                     std::to_string(n));
  }
  const KdTree tree(pseudo_cdf);
  IndexMatrix out(n, k);
  for (Index i = 0; i < n; ++i) {
    const auto nb = tree.query(pseudo_cdf.row(i).transpose(), k, i);
    for (Index c = 0; c < k; ++c) out(i, c) = nb[static_cast<std::size_t>(c)].index;
  }
  return out;
}

Index DensityGraph::edge_count() const {
  Index total = 0;
  for (const auto& adj : adjacency) total += static_cast<Index>(adj.size());
  return total / 2;
}

DensityGraph build_graph(const RowMatrix& data, const RowMatrix& pseudo_cdf, const MetricTensorField& field, Index k) {
  const Index n = data.rows();
  if (pseudo_cdf.rows() != n || field.size() != n || static_cast<Index>(field.tensors.size()) != n) {
    throw ContractViolation("data, pseudo-cdf and tensor field must be index aligned");
  }
  const IndexMatrix nb = knn(pseudo_cdf, k);
  return graph_from_neighbors(nb, [&](Index i, Index j) {
    return mahalanobis(data.row(i).transpose(), data.row(j).transpose(), field.tensors[static_cast<std::size_t>(i)],
                       field.tensors[static_cast<std::size_t>(j)]);
  });
}

std::vector<Index> DistanceResult::path_to(Index target) const {
  std::vector<Index> path;
  if (!reachable(target)) return path;
  for (Index v = target; v >= 0; v = predecessors[static_cast<std::size_t>(v)]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

DistanceResult shortest_paths(const DensityGraph& graph, Index source) {
  const Index n = graph.node_count();
  if (source < 0 || source >= n) throw InputError("source index " + std::to_string(source) + " out of range");
  DistanceResult res;
  res.source = source;
  res.distances.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  res.predecessors.assign(static_cast<std::size_t>(n), -1);
  std::vector<char> settled(static_cast<std::size_t>(n), 0);
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  res.distances[static_cast<std::size_t>(source)] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [dist, u] = queue.top();
    queue.pop();
    if (settled[static_cast<std::size_t>(u)]) continue;
    settled[static_cast<std::size_t>(u)] = 1;
    for (const Edge& e : graph.adjacency[static_cast<std::size_t>(u)]) {
      const double cand = dist + e.weight;
      auto& best = res.distances[static_cast<std::size_t>(e.to)];
      if (cand < best) {
        best = cand;
        res.predecessors[static_cast<std::size_t>(e.to)] = u;
        queue.emplace(cand, e.to);
      }
    }
  }
  return res;
}

Index DistanceMatrix::unreachable_count() const {
  return static_cast<Index>((values.array() == std::numeric_limits<double>::infinity()).count());
}

DistanceMatrix distance_matrix(const DensityGraph& graph, std::span<const Index> sources, int threads) {
  const Index n = graph.node_count();
  DistanceMatrix out;
  out.sources.assign(sources.begin(), sources.end());
  for (Index s : out.sources) {
    if (s < 0 || s >= n) throw InputError("source index " + std::to_string(s) + " out of range");
  }
  out.values.resize(static_cast<Index>(sources.size()), n);
  parallel_for(static_cast<long long>(sources.size()), threads, [&](long long r) {
    const DistanceResult res = shortest_paths(graph, out.sources[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < n; ++c) out.values(r, c) = res.distances[static_cast<std::size_t>(c)];
  });
  return out;
}

DistanceMatrix distance_matrix(const DensityGraph& graph, int threads) {
  std::vector<Index> all(static_cast<std::size_t>(graph.node_count()));
  std::iota(all.begin(), all.end(), Index{0});
  return distance_matrix(graph, all, threads);
}

void require_connected(const DistanceMatrix& matrix) {
  const Index missing = matrix.unreachable_count();
  if (missing > 0) {
    throw ConnectivityError("the neighbour graph is disconnected (" + std::to_string(missing) +
                            " unreachable pairs); rebuild it with a larger k");
  }
}

std::vector<int> connected_components(const DensityGraph& graph) {
  const Index n = graph.node_count();
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  int next = 0;
  std::vector<Index> stack;
  for (Index s = 0; s < n; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    comp[static_cast<std::size_t>(s)] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index u = stack.back();
      stack.pop_back();
      for (const Edge& e : graph.adjacency[static_cast<std::size_t>(u)]) {
        if (comp[static_cast<std::size_t>(e.to)] < 0) {
          comp[static_cast<std::size_t>(e.to)] = next;
          stack.push_back(e.to);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::vector<Index> component_sizes(const DensityGraph& graph) {
  const auto comp = connected_components(graph);
  std::vector<Index> sizes;
  for (int c : comp) {
    if (static_cast<std::size_t>(c) >= sizes.size()) sizes.resize(static_cast<std::size_t>(c) + 1, 0);
    ++sizes[static_cast<std::size_t>(c)];
  }
  return sizes;
}

RowMatrix euclidean_distance_matrix(const RowMatrix& points) {
  const Index n = points.rows();
  RowMatrix d(n, n);
  for (Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      const double v = (points.row(i) - points.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

namespace {

constexpr unsigned char kDistMagic[8] = {'L', 'A', 'M', 'D', 'I', 'S', 'T', '\0'};
constexpr std::uint32_t kDistVersion = 1;

}  // namespace

std::vector<unsigned char> serialize_distances(const DistanceMatrix& matrix) {
  const auto rows = static_cast<std::uint64_t>(matrix.values.rows());
  const auto cols = static_cast<std::uint64_t>(matrix.values.cols());
  if (matrix.sources.size() != rows) throw ContractViolation("distance matrix source list does not match its rows");
  io::ByteWriter w;
  w.bytes(kDistMagic);
  w.u32(kDistVersion);
  w.u64(rows);
  w.u64(cols);
  for (Index s : matrix.sources) w.u64(static_cast<std::uint64_t>(s));
  w.f64s({matrix.values.data(), static_cast<std::size_t>(rows * cols)});
  std::vector<unsigned char> bitmap((rows * cols + 7) / 8, 0);
  for (std::uint64_t cell = 0; cell < rows * cols; ++cell) {
    if (!(matrix.values.data()[cell] < std::numeric_limits<double>::infinity())) {
      bitmap[cell / 8] = static_cast<unsigned char>(bitmap[cell / 8] | (1u << (cell % 8)));
    }
  }
  w.bytes(bitmap);
  return w.take();
}

DistanceMatrix deserialize_distances(std::span<const unsigned char> bytes) {
  io::ByteReader r(bytes);
  const auto magic = r.bytes(sizeof(kDistMagic));
  if (std::memcmp(magic.data(), kDistMagic, sizeof(kDistMagic)) != 0) throw IoError("not a distance matrix file");
  if (r.u32() != kDistVersion) throw IoError("unsupported distance matrix version");
  const std::uint64_t rows = r.u64();
  const std::uint64_t cols = r.u64();
  if (rows * cols * 8 > bytes.size()) throw IoError("distance matrix header is inconsistent with file size");
  DistanceMatrix m;
  for (std::uint64_t i = 0; i < rows; ++i) m.sources.push_back(static_cast<Index>(r.u64()));
  m.values.resize(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::uint64_t c = 0; c < rows * cols; ++c) m.values.data()[c] = r.f64();
  const auto bitmap = r.bytes((rows * cols + 7) / 8);
  for (std::uint64_t cell = 0; cell < rows * cols; ++cell) {
    if (bitmap[cell / 8] & (1u << (cell % 8))) m.values.data()[cell] = std::numeric_limits<double>::infinity();
  }
  if (!r.exhausted()) throw IoError("trailing bytes after distance matrix");
  return m;
}

void save_distances(const std::filesystem::path& path, const DistanceMatrix& matrix) {
  io::write_file_atomic(path, serialize_distances(matrix));
}

DistanceMatrix load_distances(const std::filesystem::path& path) { return deserialize_distances(io::read_file(path)); }

std::string distances_to_csv(const DistanceMatrix& matrix) {
  std::string out = "source";
  for (Index c = 0; c < matrix.values.cols(); ++c) out += ",d" + std::to_string(c);
  out += '\n';
  for (Index r = 0; r < matrix.values.rows(); ++r) {
    out += std::to_string(matrix.sources[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < matrix.values.cols(); ++c) {
      out += ',';
      out += io::format_double(matrix.values(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string graph_edges_to_csv(const DensityGraph& graph) {
  std::string out = "i,j,weight\n";
  for (Index i = 0; i < graph.node_count(); ++i) {
    for (const Edge& e : graph.adjacency[static_cast<std::size_t>(i)]) {
      if (e.to <= i) continue;
      out += std::to_string(i) + "," + std::to_string(e.to) + "," + io::format_double(e.weight) + "\n";
    }
  }
  return out;
}

}  // namespace laminar
