// laminar: command-line front end.
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include "laminar/clustering.hpp"
#include "laminar/datasets.hpp"
#include "laminar/density_graph.hpp"
#include "laminar/flow.hpp"
#include "laminar/io.hpp"
#include "laminar/metric_field.hpp"
#include "laminar/pipeline.hpp"
#include "laminar/train.hpp"
#include "laminar/viz.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace laminar;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GenerateArgs {
  std::string kind = "two_moons";
  Index n = 1000;
  std::uint64_t seed = 0;
  double noise = 0.1;
  int dim = 2;
  std::string transform = "shear";
  double amount = 1.0;
  fs::path out = "data.csv";
};

struct TrainArgs {
  fs::path data;
  fs::path out = "model.lamflow";
  fs::path loss_csv;
  TrainConfig cfg;
  bool quiet = false;
};

struct DistanceArgs {
  fs::path data;
  fs::path model;
  Index k = kDefaultGraphK;
  fs::path out = "distances.bin";
  fs::path csv;
  fs::path tensors;
  std::vector<Index> sources;
  int threads = 1;
};

struct ClusterArgs {
  fs::path distances;
  Index k = 2;
  std::uint64_t seed = 0;
  fs::path out = "labels.csv";
  fs::path truth;
};

struct VizArgs {
  std::string kind;
  fs::path data;
  fs::path model;
  fs::path distances;
  Index query = 0;
  Index contour_k = 25;
  int resolution = 200;
  fs::path out;
};

struct CompareArgs {
  fs::path data;
  fs::path model;
  fs::path spec;
  int threads = 1;
};

struct RunArgs {
  fs::path config;
  fs::path out;
  int threads = 0;
};

GroundTruthTransform make_transform(const std::string& name, double amount) {
  if (name == "identity") return GroundTruthTransform::identity();
  if (name == "shear") return GroundTruthTransform::shear(amount);
  if (name == "stretch") return GroundTruthTransform::stretch(amount, 1.0);
  if (name == "swirl") return GroundTruthTransform::swirl(amount);
  if (name == "radial") return GroundTruthTransform::radial(amount);
  if (name == "bend") return GroundTruthTransform::bend(amount, 3.0);
  throw InputError("unknown transform '" + name + "'");
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  return p.replace_extension(".json");
}

int cmd_generate(const GenerateArgs& a) {
  DatasetSpec spec;
  spec.kind = parse_dataset_kind(a.kind);
  spec.n_points = a.n;
  spec.seed = a.seed;
  spec.noise = a.noise;
  spec.dim = a.dim;
  if (spec.kind == DatasetKind::transformed_disk) spec.transform = make_transform(a.transform, a.amount);
  const Dataset ds = generate(spec);
  io::write_file_atomic(a.out, io::point_cloud_to_csv(ds.cloud));
  io::write_file_atomic(sidecar_path(a.out), to_json(spec).dump(2) + "\n");
  std::cout << "wrote " << ds.cloud.size() << " points to " << a.out.string() << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const PointCloud cloud = io::read_point_cloud_csv(a.data);
  TrainProgress progress;
  if (!a.quiet) {
    progress = [](int epoch, double loss) {
      if (epoch % 10 == 0) std::cerr << "epoch " << epoch << " loss " << io::format_double(loss) << "\n";
    };
  }
  TrainResult r;
  try {
    r = train(cloud, a.cfg, progress);
  } catch (const TrainingAborted& e) {
    const fs::path rescue = fs::path(a.out).concat(".last_finite");
    save_checkpoint(rescue, e.last_finite());
    std::cerr << "last finite model saved to " << rescue.string() << "\n";
    throw;
  }
  save_checkpoint(a.out, r.model);
  const fs::path loss_path = a.loss_csv.empty() ? fs::path(a.out).replace_extension(".loss.csv") : a.loss_csv;
  io::write_file_atomic(loss_path, loss_log_csv(r.loss_history));
  std::cout << "final loss " << io::format_double(r.final_loss) << "\n";
  return 0;
}

void warn_if_disconnected(const DensityGraph& graph, Index k) {
  const std::vector<Index> sizes = component_sizes(graph);
  if (sizes.size() <= 1) return;
  std::cerr << "warning: graph with k = " << k << " has " << sizes.size() << " components (sizes";
  for (Index s : sizes) std::cerr << " " << s;
  std::cerr << "); unreachable pairs are stored as inf, consider a larger k\n";
}

int cmd_distances(const DistanceArgs& a) {
  const PointCloud cloud = io::read_point_cloud_csv(a.data);
  const FlowModel model = load_checkpoint(a.model);
  const LaminarDistances lam = compute_distances(cloud.points, model, a.k, a.sources, a.threads);
  warn_if_disconnected(lam.graph, a.k);
  save_distances(a.out, lam.distances);
  if (!a.csv.empty()) io::write_file_atomic(a.csv, distances_to_csv(lam.distances));
  if (!a.tensors.empty()) io::write_file_atomic(a.tensors, field_to_csv(lam.evaluation.field));
  std::cout << "wrote " << lam.distances.values.rows() << " x " << lam.distances.values.cols() << " distances to "
            << a.out.string() << "\n";
  return 0;
}

int cmd_cluster(const ClusterArgs& a) {
  const DistanceMatrix d = load_distances(a.distances);
  if (d.values.rows() != d.values.cols()) throw InputError("clustering needs a full N x N distance matrix");
  require_connected(d);
  const ClusteringResult r = k_medoids(d.values, a.k, a.seed);
  io::write_file_atomic(a.out, io::labels_to_csv(r.assignment, "cluster"));
  std::cout << "total cost " << io::format_double(r.total_cost) << "\n";
  if (!a.truth.empty()) {
    const std::vector<int> truth = io::read_labels_csv(a.truth);
    std::cout << format_jaccard_table(jaccard_best_match(truth, r.assignment));
  }
  return 0;
}

std::vector<double> distance_row(const DistanceMatrix& d, Index query) {
  Index row = query;
  if (d.values.rows() != d.values.cols()) {
    const auto it = std::find(d.sources.begin(), d.sources.end(), query);
    if (it == d.sources.end()) throw InputError("query " + std::to_string(query) + " is not a source in the distance file");
    row = it - d.sources.begin();
  }
  if (row < 0 || row >= d.values.rows()) throw InputError("query index out of range");
  return {d.values.row(row).begin(), d.values.row(row).end()};
}

int cmd_viz(const VizArgs& a) {
  json manifest{{"kind", a.kind}};
  std::string svg;
  if (a.kind == "wheel") {
    svg = viz::colour_wheel_svg();
  } else {
    if (a.data.empty()) throw InputError("--data is required for " + a.kind);
    const PointCloud cloud = io::read_point_cloud_csv(a.data);
    manifest["data"] = a.data.string();
    if (a.kind == "tensors") {
      if (a.model.empty()) throw InputError("--model is required for tensors");
      svg = viz::tensor_field_svg(evaluate_field(cloud.points, load_checkpoint(a.model)).field);
      manifest["model"] = a.model.string();
    } else if (a.kind == "distance" || a.kind == "ratio") {
      if (a.distances.empty()) throw InputError("--distances is required for " + a.kind);
      const std::vector<double> lam = distance_row(load_distances(a.distances), a.query);
      if (static_cast<Index>(lam.size()) != cloud.size()) throw InputError("distance row length does not match the data");
      manifest["distances"] = a.distances.string();
      manifest["query"] = a.query;
      if (a.kind == "distance") {
        svg = viz::distance_map_svg(cloud.points, lam, a.query, a.contour_k, a.resolution);
      } else {
        std::vector<double> euc(lam.size());
        for (Index j = 0; j < cloud.size(); ++j) euc[static_cast<std::size_t>(j)] = (cloud.points.row(j) - cloud.points.row(a.query)).norm();
        svg = viz::ratio_map_svg(cloud.points, viz::ratio_values(lam, euc, a.query), a.query);
      }
    } else {
      throw InputError("unknown figure kind '" + a.kind + "'");
    }
  }
  viz::write_figure(a.out, svg, manifest);
  std::cout << "wrote " << a.out.string() << "\n";
  return 0;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int cmd_compare(const CompareArgs& a) {
  const PointCloud cloud = io::read_point_cloud_csv(a.data);
  const fs::path spec_path = a.spec.empty() ? sidecar_path(a.data) : a.spec;
  std::ifstream in(spec_path);
  if (!in) throw IoError("cannot open " + spec_path.string());
  const DatasetSpec spec = dataset_spec_from_json(json::parse(in));
  if (spec.kind != DatasetKind::transformed_disk && spec.kind != DatasetKind::uniform_disk) {
    throw InputError("compare needs a uniform_disk or transformed_disk dataset");
  }
  const GroundTruthTransform t =
      spec.kind == DatasetKind::uniform_disk ? GroundTruthTransform::identity() : spec.transform;
  const MetricTensorField field = evaluate_field(cloud.points, load_checkpoint(a.model), a.threads).field;

  std::vector<Matrix> truth;
  truth.reserve(static_cast<std::size_t>(cloud.size()));
  for (Index i = 0; i < cloud.size(); ++i) truth.push_back(ground_truth_metric(cloud.points.row(i).transpose(), t));
  auto scores = [&](double c) {
    std::vector<double> s(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) s[i] = wasserstein_gaussian(c * field.tensors[i], truth[i]);
    return s;
  };
  // The flow fixes tensors only up to a global scale; pick the scale that
  // minimises the median by golden section on log c.
  double lo = std::log(1e-4), hi = std::log(1e4);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (quantile(scores(std::exp(x1)), 0.5) < quantile(scores(std::exp(x2)), 0.5)) {
      hi = x2;
    } else {
      lo = x1;
    }
  }
  const double c = std::exp(0.5 * (lo + hi));
  const std::vector<double> raw = scores(1.0), aligned = scores(c);
  std::printf("transform %s, %lld points\n", t.name().c_str(), static_cast<long long>(cloud.size()));
  std::printf("unscaled  median W2 %.6g  p90 W2 %.6g\n", quantile(raw, 0.5), quantile(raw, 0.9));
  std::printf("scale %.6g  median W2 %.6g  p90 W2 %.6g\n", c, quantile(aligned, 0.5), quantile(aligned, 0.9));
  return 0;
}

int cmd_run(const RunArgs& a) {
  PipelineConfig cfg = load_pipeline_config(a.config);
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.threads > 0) cfg.threads = a.threads;
  const PipelineReport r = run_pipeline(cfg);
  std::cout << "points " << r.n_points << ", final loss " << io::format_double(r.final_loss) << ", edges "
            << r.edge_count << "\n";
  if (r.jaccard) std::cout << format_jaccard_table(*r.jaccard);
  std::cout << "artifacts in " << cfg.output_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-aware geodesic distances from a continuous normalizing flow"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Sample a synthetic dataset to CSV (plus a .json spec sidecar)");
  g->add_option("--kind", gen.kind, "uniform_disk, transformed_disk, two_moons, concentric_rings, anisotropic_blobs, filament_clusters")
      ->capture_default_str();
  g->add_option("-n,--points", gen.n, "Number of points")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  g->add_option("--noise", gen.noise, "Noise level for moons, rings, filaments")->capture_default_str();
  g->add_option("--dim", gen.dim, "Dimension for disk datasets")->capture_default_str();
  g->add_option("--transform", gen.transform, "identity, shear, stretch, swirl, radial, bend")->capture_default_str();
  g->add_option("--amount", gen.amount, "Transform strength")->capture_default_str();
  g->add_option("-o,--out", gen.out, "Output CSV")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fit a flow to a CSV point cloud");
  t->add_option("--data", tr.data, "Input CSV")->required();
  t->add_option("-o,--out", tr.out, "Checkpoint path")->capture_default_str();
  t->add_option("--loss-csv", tr.loss_csv, "Per-epoch loss log (default <out>.loss.csv)");
  t->add_option("--epochs", tr.cfg.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.cfg.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--units", tr.cfg.num_units, "Planar units")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--hidden", tr.cfg.hidden_width, "Hypernetwork width")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--steps", tr.cfg.train_steps, "RK4 steps unrolled per epoch")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--batch", tr.cfg.batch_size, "Minibatch size above the full-batch limit")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed)->capture_default_str();
  t->add_flag("!--no-cosine", tr.cfg.cosine_decay, "Keep the learning rate constant");
  t->add_flag("-q,--quiet", tr.quiet);

  DistanceArgs di;
  auto* d = app.add_subcommand("distances", "Geodesic distances under a trained flow");
  d->add_option("--data", di.data)->required();
  d->add_option("--model", di.model)->required();
  d->add_option("-k", di.k, "Neighbours per point")->capture_default_str()->check(CLI::PositiveNumber);
  d->add_option("-o,--out", di.out, "Binary distance file")->capture_default_str();
  d->add_option("--csv", di.csv, "Also write distances as CSV");
  d->add_option("--tensors", di.tensors, "Also write the tensor field as CSV");
  d->add_option("--sources", di.sources, "Source indices (default: all points)");
  d->add_option("--threads", di.threads)->capture_default_str()->check(CLI::PositiveNumber);

  ClusterArgs cl;
  auto* c = app.add_subcommand("cluster", "k-medoids on a distance file");
  c->add_option("--distances", cl.distances)->required();
  c->add_option("-k", cl.k, "Number of clusters")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", cl.seed)->capture_default_str();
  c->add_option("-o,--out", cl.out)->capture_default_str();
  c->add_option("--truth", cl.truth, "CSV with a 'label' column to score against");

  VizArgs vz;
  auto* v = app.add_subcommand("viz", "Render an SVG figure and its JSON manifest");
  v->add_option("kind", vz.kind, "tensors, distance, ratio, wheel")->required()->check(CLI::IsMember({"tensors", "distance", "ratio", "wheel"}));
  v->add_option("--data", vz.data);
  v->add_option("--model", vz.model);
  v->add_option("--distances", vz.distances);
  v->add_option("--query", vz.query)->capture_default_str();
  v->add_option("--contour-k", vz.contour_k)->capture_default_str();
  v->add_option("--resolution", vz.resolution)->capture_default_str();
  v->add_option("-o,--out", vz.out)->required();

  CompareArgs cp;
  auto* m = app.add_subcommand("compare", "W2 between learned and ground-truth tensors on a transformed disk");
  m->add_option("--data", cp.data)->required();
  m->add_option("--model", cp.model)->required();
  m->add_option("--spec", cp.spec, "Dataset spec JSON (default: the data's .json sidecar)");
  m->add_option("--threads", cp.threads)->capture_default_str()->check(CLI::PositiveNumber);

  RunArgs rn;
  auto* r = app.add_subcommand("run", "Full pipeline from a JSON config");
  r->add_option("--config", rn.config)->required();
  r->add_option("-o,--out", rn.out, "Override the output directory");
  r->add_option("--threads", rn.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*d) return cmd_distances(di);
    if (*c) return cmd_cluster(cl);
    if (*v) return cmd_viz(vz);
    if (*m) return cmd_compare(cp);
    if (*r) return cmd_run(rn);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
