#include "laminar/clustering.hpp"

#include "laminar/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace laminar {

namespace {

void validate_distances(const RowMatrix& d) {
  if (d.rows() != d.cols()) throw InputError("distance matrix must be square");
  if (!d.allFinite()) {
    throw InputError("distance matrix has non-finite entries; the neighbour graph is probably disconnected "
                     "(increase k)");
  }
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  for (Index i = 0; i < d.rows(); ++i) {
    if (std::abs(d(i, i)) > 1e-12 * scale) throw InputError("distance matrix must have a zero diagonal");
    for (Index j = i + 1; j < d.cols(); ++j) {
      if (std::abs(d(i, j) - d(j, i)) > 1e-9 * scale) throw InputError("distance matrix must be symmetric");
      if (d(i, j) < 0.0) throw InputError("distances must be non-negative");
    }
  }
}

struct Nearest {
  std::vector<int> slot;       // medoid position of the closest medoid
  std::vector<double> first;   // distance to it
  std::vector<double> second;  // distance to the runner-up (+inf when k == 1)
};

Nearest nearest_medoids(const RowMatrix& d, const std::vector<Index>& medoids) {
  const Index n = d.rows();
  Nearest nr;
  nr.slot.assign(static_cast<std::size_t>(n), 0);
  nr.first.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  nr.second.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (Index o = 0; o < n; ++o) {
    auto& f = nr.first[static_cast<std::size_t>(o)];
    auto& s = nr.second[static_cast<std::size_t>(o)];
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      const double v = d(o, medoids[m]);
      if (v < f || (v == f && medoids[m] < medoids[static_cast<std::size_t>(nr.slot[static_cast<std::size_t>(o)])])) {
        s = f;
        f = v;
        nr.slot[static_cast<std::size_t>(o)] = static_cast<int>(m);
      } else if (v < s) {
        s = v;
      }
    }
  }
  return nr;
}

}  // namespace

double medoid_cost(const RowMatrix& distances, std::span<const Index> medoids) {
  double cost = 0.0;
  for (Index o = 0; o < distances.rows(); ++o) {
    double best = std::numeric_limits<double>::infinity();
    for (Index m : medoids) best = std::min(best, distances(o, m));
    cost += best;
  }
  return cost;
}

ClusteringResult k_medoids(const RowMatrix& distances, Index k, std::uint64_t seed) {
  validate_distances(distances);
  const Index n = distances.rows();
  if (k < 1 || k > n) throw InputError("k must lie in [1, N]");

  // Candidate visiting order; ties go to whichever candidate comes first.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  std::vector<char> is_medoid(static_cast<std::size_t>(n), 0);
  std::vector<Index> medoids;
  medoids.reserve(static_cast<std::size_t>(k));

  // BUILD
  {
    Index best = -1;
    double best_sum = std::numeric_limits<double>::infinity();
    for (Index c : order) {
      const double sum = distances.row(c).sum();
      if (sum < best_sum) {
        best_sum = sum;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[static_cast<std::size_t>(best)] = 1;
  }
  std::vector<double> d1(static_cast<std::size_t>(n));
  for (Index o = 0; o < n; ++o) d1[static_cast<std::size_t>(o)] = distances(o, medoids[0]);
  while (static_cast<Index>(medoids.size()) < k) {
    Index best = -1;
    double best_gain = -1.0;
    for (Index c : order) {
      if (is_medoid[static_cast<std::size_t>(c)]) continue;
      double gain = 0.0;
      for (Index o = 0; o < n; ++o) gain += std::max(0.0, d1[static_cast<std::size_t>(o)] - distances(o, c));
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    medoids.push_back(best);
    is_medoid[static_cast<std::size_t>(best)] = 1;
    for (Index o = 0; o < n; ++o) {
      d1[static_cast<std::size_t>(o)] = std::min(d1[static_cast<std::size_t>(o)], distances(o, best));
    }
  }

  // SWAP
  ClusteringResult result;
  double cost = medoid_cost(distances, medoids);
  const int max_swaps = 10000;
  while (result.swaps < max_swaps && k < n) {
    const Nearest nr = nearest_medoids(distances, medoids);
    double best_delta = 0.0;
    std::size_t best_slot = 0;
    Index best_h = -1;
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      for (Index h : order) {
        if (is_medoid[static_cast<std::size_t>(h)]) continue;
        double delta = 0.0;
        for (Index o = 0; o < n; ++o) {
          const auto so = static_cast<std::size_t>(o);
          const double doh = distances(o, h);
          if (nr.slot[so] == static_cast<int>(m)) {
            delta += std::min(doh, nr.second[so]) - nr.first[so];
          } else if (doh < nr.first[so]) {
            delta += doh - nr.first[so];
          }
        }
        if (delta < best_delta) {
          best_delta = delta;
          best_slot = m;
          best_h = h;
        }
      }
    }
    if (best_h < 0 || best_delta >= -1e-12 * std::max(1.0, cost)) break;
    is_medoid[static_cast<std::size_t>(medoids[best_slot])] = 0;
    medoids[best_slot] = best_h;
    is_medoid[static_cast<std::size_t>(best_h)] = 1;
    cost = medoid_cost(distances, medoids);
    ++result.swaps;
  }

  std::sort(medoids.begin(), medoids.end());
  const Nearest nr = nearest_medoids(distances, medoids);
  result.medoids = medoids;
  result.assignment = nr.slot;
  result.total_cost = 0.0;
  for (double v : nr.first) result.total_cost += v;
  return result;
}

std::vector<JaccardScore> jaccard_best_match(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw InputError("label arrays must have equal length");
  if (truth.empty()) throw InputError("no ground-truth clusters: Jaccard index is undefined");
  std::map<int, Index> truth_sizes;
  std::map<int, Index> pred_sizes;
  std::map<std::pair<int, int>, Index> overlap;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++truth_sizes[truth[i]];
    ++pred_sizes[predicted[i]];
    ++overlap[{truth[i], predicted[i]}];
  }
  std::vector<JaccardScore> scores;
  for (const auto& [t, tsize] : truth_sizes) {
    JaccardScore s;
    s.truth_label = t;
    s.truth_size = tsize;
    s.score = -1.0;
    for (const auto& [p, psize] : pred_sizes) {
      const auto it = overlap.find({t, p});
      const Index inter = it == overlap.end() ? 0 : it->second;
      const double j = static_cast<double>(inter) / static_cast<double>(tsize + psize - inter);
      if (j > s.score) {
        s.score = j;
        s.best_predicted_label = p;
      }
    }
    scores.push_back(s);
  }
  return scores;
}

double mean_score(const std::vector<JaccardScore>& scores) {
  if (scores.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : scores) acc += s.score;
  return acc / static_cast<double>(scores.size());
}

std::string format_jaccard_table(const std::vector<JaccardScore>& scores) {
  std::string out = "truth  size  best_match  jaccard\n";
  char line[128];
  for (const auto& s : scores) {
    std::snprintf(line, sizeof line, "%5d  %4lld  %10d  %7.3f\n", s.truth_label, static_cast<long long>(s.truth_size),
                  s.best_predicted_label, s.score);
    out += line;
  }
  std::snprintf(line, sizeof line, "mean   %26.3f\n", mean_score(scores));
  out += line;
  return out;
}

}  // namespace laminar
