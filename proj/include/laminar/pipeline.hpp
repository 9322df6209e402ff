#pragma once

#include "laminar/clustering.hpp"
#include "laminar/datasets.hpp"
#include "laminar/density_graph.hpp"
#include "laminar/flow.hpp"
#include "laminar/metric_field.hpp"
#include "laminar/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace laminar {

inline constexpr Index kDefaultGraphK = 20;

// Pseudo-cdf, tensor field, graph and geodesic distances for data under a
// trained model.
struct LaminarDistances {
  FieldEvaluation evaluation;
  DensityGraph graph;
  DistanceMatrix distances;
};

// sources empty = all points.
LaminarDistances compute_distances(const RowMatrix& x, const FlowModel& model, Index k,
                                   std::span<const Index> sources = {}, int threads = 1);

struct PipelineConfig {
  std::optional<DatasetSpec> dataset;
  std::optional<std::filesystem::path> input_csv;
  TrainConfig flow;
  Index graph_k = kDefaultGraphK;
  Index cluster_k = 2;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "laminar_out";
  int threads = 1;
};

// Stage seeds derived from the master seed.
enum class Stage : std::uint64_t { dataset = 0, flow = 1, clustering = 2 };
std::uint64_t stage_seed(const PipelineConfig& config, Stage stage);

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct PipelineReport {
  Index n_points = 0;
  double final_loss = 0.0;
  Index edge_count = 0;
  std::vector<Index> component_sizes;
  std::optional<std::vector<JaccardScore>> jaccard;
};

/// Data -> trained flow -> tensor field -> graph -> full distance matrix ->
/// k-medoids. Every artifact lands in config.output_dir:
///   data.csv, data.json (dataset inputs only), model.lamflow, loss.csv,
///   pseudo_cdf.csv, tensors.csv, graph.csv, distances.bin, distances.csv,
///   labels.csv, config.json, and jaccard.txt when ground truth exists.
PipelineReport run_pipeline(const PipelineConfig& config);

std::string loss_log_csv(const std::vector<double>& losses);

}  // namespace laminar
