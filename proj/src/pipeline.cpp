#include "laminar/pipeline.hpp"

#include "laminar/io.hpp"
#include "laminar/random.hpp"

#include <fstream>
#include <numeric>

namespace laminar {

using nlohmann::json;

LaminarDistances compute_distances(const RowMatrix& x, const FlowModel& model, Index k, std::span<const Index> sources,
                                   int threads) {
  LaminarDistances out;
  out.evaluation = evaluate_field(x, model, threads);
  out.graph = build_graph(x, out.evaluation.pseudo_cdf, out.evaluation.field, k);
  if (sources.empty()) {
    out.distances = distance_matrix(out.graph, threads);
  } else {
    out.distances = distance_matrix(out.graph, sources, threads);
  }
  return out;
}

std::uint64_t stage_seed(const PipelineConfig& config, Stage stage) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stage));
}

json to_json(const PipelineConfig& c) {
  json j;
  if (c.dataset) j["dataset"] = to_json(*c.dataset);
  if (c.input_csv) j["input_csv"] = c.input_csv->string();
  j["flow"] = {{"num_units", c.flow.num_units},
               {"hidden_width", c.flow.hidden_width},
               {"train_steps", c.flow.train_steps},
               {"inference_steps", c.flow.inference_steps},
               {"epochs", c.flow.epochs},
               {"learning_rate", c.flow.learning_rate},
               {"cosine_decay", c.flow.cosine_decay},
               {"batch_size", c.flow.batch_size},
               {"full_batch_limit", c.flow.full_batch_limit}};
  j["graph_k"] = c.graph_k;
  j["cluster_k"] = c.cluster_k;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["threads"] = c.threads;
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j) {
  try {
    PipelineConfig c;
    if (j.contains("dataset")) c.dataset = dataset_spec_from_json(j.at("dataset"));
    if (j.contains("input_csv")) c.input_csv = j.at("input_csv").get<std::string>();
    if (j.contains("flow")) {
      const auto& f = j.at("flow");
      c.flow.num_units = f.value("num_units", c.flow.num_units);
      c.flow.hidden_width = f.value("hidden_width", c.flow.hidden_width);
      c.flow.train_steps = f.value("train_steps", c.flow.train_steps);
      c.flow.inference_steps = f.value("inference_steps", c.flow.inference_steps);
      c.flow.epochs = f.value("epochs", c.flow.epochs);
      c.flow.learning_rate = f.value("learning_rate", c.flow.learning_rate);
      c.flow.cosine_decay = f.value("cosine_decay", c.flow.cosine_decay);
      c.flow.batch_size = f.value("batch_size", c.flow.batch_size);
      c.flow.full_batch_limit = f.value("full_batch_limit", c.flow.full_batch_limit);
    }
    c.graph_k = j.value("graph_k", c.graph_k);
    c.cluster_k = j.value("cluster_k", c.cluster_k);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.threads = j.value("threads", c.threads);
    if (c.dataset.has_value() == c.input_csv.has_value()) {
      throw InputError("configuration needs exactly one of 'dataset' or 'input_csv'");
    }
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid pipeline configuration: ") + e.what());
  }
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

std::string loss_log_csv(const std::vector<double>& losses) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) out += std::to_string(e) + "," + io::format_double(losses[e]) + "\n";
  return out;
}

PipelineReport run_pipeline(const PipelineConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir = config.output_dir;

  PointCloud cloud;
  std::optional<json> data_sidecar;
  if (config.dataset) {
    DatasetSpec spec = *config.dataset;
    spec.seed = stage_seed(config, Stage::dataset);
    Dataset ds = generate(spec);
    cloud = std::move(ds.cloud);
    data_sidecar = to_json(spec);
  } else {
    cloud = io::read_point_cloud_csv(*config.input_csv);
  }

  TrainConfig tc = config.flow;
  tc.seed = stage_seed(config, Stage::flow);
  const TrainResult trained = train(cloud, tc);

  const LaminarDistances lam = compute_distances(cloud.points, trained.model, config.graph_k, {}, config.threads);
  require_connected(lam.distances);

  const ClusteringResult clusters =
      k_medoids(lam.distances.values, config.cluster_k, stage_seed(config, Stage::clustering));

  PipelineReport report;
  report.n_points = cloud.size();
  report.final_loss = trained.final_loss;
  report.edge_count = lam.graph.edge_count();
  report.component_sizes = component_sizes(lam.graph);

  // Outputs are only written once every stage has succeeded.
  io::write_file_atomic(dir / "data.csv", io::point_cloud_to_csv(cloud));
  if (data_sidecar) io::write_file_atomic(dir / "data.json", data_sidecar->dump(2) + "\n");
  save_checkpoint(dir / "model.lamflow", trained.model);
  io::write_file_atomic(dir / "loss.csv", loss_log_csv(trained.loss_history));
  {
    PointCloud pseudo{lam.evaluation.pseudo_cdf, std::nullopt};
    io::write_file_atomic(dir / "pseudo_cdf.csv", io::point_cloud_to_csv(pseudo));
  }
  io::write_file_atomic(dir / "tensors.csv", field_to_csv(lam.evaluation.field));
  io::write_file_atomic(dir / "graph.csv", graph_edges_to_csv(lam.graph));
  save_distances(dir / "distances.bin", lam.distances);
  io::write_file_atomic(dir / "distances.csv", distances_to_csv(lam.distances));
  io::write_file_atomic(dir / "labels.csv", io::labels_to_csv(clusters.assignment, "cluster"));
  if (cloud.labels) {
    report.jaccard = jaccard_best_match(*cloud.labels, clusters.assignment);
    io::write_file_atomic(dir / "jaccard.txt", format_jaccard_table(*report.jaccard));
  }
  io::write_file_atomic(dir / "config.json", to_json(config).dump(2) + "\n");
  return report;
}

}  // namespace laminar
