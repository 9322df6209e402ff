#pragma once

#include "laminar/common.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace laminar {

struct ClusteringResult {
  std::vector<Index> medoids;  // ascending point indices
  std::vector<int> assignment; // position of the nearest medoid in `medoids`
  double total_cost = 0.0;
  int swaps = 0;
};

/// PAM k-medoids on a precomputed distance matrix: greedy BUILD followed by
/// best-improvement SWAP until no exchange lowers the total cost. The seed
/// only fixes the order in which equally good candidates are considered.
ClusteringResult k_medoids(const RowMatrix& distances, Index k, std::uint64_t seed = 0);

// Cost of assigning every point to its nearest medoid.
double medoid_cost(const RowMatrix& distances, std::span<const Index> medoids);

struct JaccardScore {
  int truth_label = 0;
  int best_predicted_label = 0;
  Index truth_size = 0;
  double score = 0.0;
};

// For every ground-truth cluster, the best Jaccard index over predicted clusters.
std::vector<JaccardScore> jaccard_best_match(std::span<const int> truth, std::span<const int> predicted);

double mean_score(const std::vector<JaccardScore>& scores);

// Plain-text table, one line per ground-truth cluster.
std::string format_jaccard_table(const std::vector<JaccardScore>& scores);

}  // namespace laminar
