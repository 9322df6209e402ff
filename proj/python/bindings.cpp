#include "laminar/clustering.hpp"
#include "laminar/datasets.hpp"
#include "laminar/density_graph.hpp"
#include "laminar/flow.hpp"
#include "laminar/metric_field.hpp"
#include "laminar/pipeline.hpp"
#include "laminar/sphere_map.hpp"
#include "laminar/train.hpp"

#include <json.hpp>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace laminar;

namespace {

py::array_t<double> stack_tensors(const std::vector<Matrix>& tensors, int d) {
  py::array_t<double> out({static_cast<py::ssize_t>(tensors.size()), static_cast<py::ssize_t>(d), static_cast<py::ssize_t>(d)});
  auto v = out.mutable_unchecked<3>();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) v(static_cast<py::ssize_t>(i), r, c) = tensors[i](r, c);
    }
  }
  return out;
}

py::dict generate_dataset(const std::string& kind, Index n, std::uint64_t seed, double noise, int dim,
                          const std::string& transform, double amount) {
  DatasetSpec spec;
  spec.kind = parse_dataset_kind(kind);
  spec.n_points = n;
  spec.seed = seed;
  spec.noise = noise;
  spec.dim = dim;
  if (spec.kind == DatasetKind::transformed_disk) {
    spec.transform = transform_from_json(nlohmann::json{{"kind", transform}, {"strength", amount}, {"sx", amount}});
  }
  Dataset ds = generate(spec);
  py::dict out;
  out["points"] = ds.cloud.points;
  out["labels"] = ds.cloud.labels ? py::cast(*ds.cloud.labels) : py::none();
  if (ds.transform) {
    std::vector<Matrix> truth;
    for (Index i = 0; i < ds.cloud.size(); ++i) truth.push_back(ground_truth_metric(ds.cloud.points.row(i).transpose(), *ds.transform));
    out["ground_truth_tensors"] = stack_tensors(truth, ds.cloud.dim());
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_laminar, m) {
  m.doc() = "Density-aware geodesic distances from a continuous normalizing flow";

  auto base = py::register_exception<Error>(m, "LaminarError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConnectivityError>(m, "ConnectivityError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<TrainingAborted>(m, "TrainingAborted", base.ptr());

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("num_units", &TrainConfig::num_units)
      .def_readwrite("hidden_width", &TrainConfig::hidden_width)
      .def_readwrite("train_steps", &TrainConfig::train_steps)
      .def_readwrite("inference_steps", &TrainConfig::inference_steps)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("cosine_decay", &TrainConfig::cosine_decay)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("full_batch_limit", &TrainConfig::full_batch_limit)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<FlowModel>(m, "FlowModel")
      .def_readonly("dim", &FlowModel::dim)
      .def_readwrite("n_steps", &FlowModel::n_steps)
      .def_property_readonly("parameter_count", [](const FlowModel& f) { return f.hypernet.parameter_count(); })
      .def("save", [](const FlowModel& f, const std::filesystem::path& p) { save_checkpoint(p, f); })
      .def_static("load", &load_checkpoint)
      .def("to_bytes", [](const FlowModel& f) {
        const auto b = serialize_model(f);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      })
      .def_static("from_bytes", [](const py::bytes& b) {
        const std::string s = b;
        return deserialize_model({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
      });

  m.def("generate", &generate_dataset, py::arg("kind"), py::arg("n"), py::arg("seed") = 0, py::arg("noise") = 0.1,
        py::arg("dim") = 2, py::arg("transform") = "shear", py::arg("amount") = 1.0,
        "Synthetic dataset as a dict with 'points', 'labels' and, for disks, 'ground_truth_tensors'.");

  m.def(
      "train",
      [](const RowMatrix& points, const TrainConfig& cfg, const std::optional<std::vector<int>>& labels) {
        PointCloud cloud{points, labels};
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(cloud, cfg);
        }
        return py::make_tuple(std::move(r.model), std::move(r.loss_history));
      },
      py::arg("points"), py::arg("config") = TrainConfig{}, py::arg("labels") = std::nullopt,
      "Returns (model, per-epoch losses).");

  m.def(
      "push_forward",
      [](const RowMatrix& x, const FlowModel& model) {
        BatchFlow b = integrate_batch(x, model);
        return py::make_tuple(b.z, b.delta_logp);
      },
      py::arg("x"), py::arg("model"), "Latent codes and log-density changes for each row.");

  m.def("log_likelihood", py::overload_cast<const RowMatrix&, const FlowModel&>(&log_likelihood_batch), py::arg("x"),
        py::arg("model"));

  m.def("to_ball", &to_ball_rows, py::arg("z"), "Radial map from R^d into the unit ball, row-wise.");

  m.def(
      "metric_tensors",
      [](const RowMatrix& x, const FlowModel& model, int threads) {
        const FieldEvaluation ev = evaluate_field(x, model, threads);
        return py::make_tuple(ev.pseudo_cdf, stack_tensors(ev.field.tensors, ev.field.dim()));
      },
      py::arg("x"), py::arg("model"), py::arg("threads") = 1, "Returns (pseudo_cdf, tensors of shape (N, d, d)).");

  m.def(
      "distances",
      [](const RowMatrix& x, const FlowModel& model, Index k, const std::vector<Index>& sources, int threads) {
        py::gil_scoped_release release;
        return compute_distances(x, model, k, sources, threads).distances.values;
      },
      py::arg("x"), py::arg("model"), py::arg("k") = kDefaultGraphK, py::arg("sources") = std::vector<Index>{},
      py::arg("threads") = 1, "Geodesic distances, one row per source (all points by default); inf when unreachable.");

  m.def("euclidean_distances", &euclidean_distance_matrix, py::arg("points"));

  m.def(
      "k_medoids",
      [](const RowMatrix& d, Index k, std::uint64_t seed) {
        const ClusteringResult r = k_medoids(d, k, seed);
        return py::make_tuple(r.medoids, r.assignment, r.total_cost);
      },
      py::arg("distances"), py::arg("k"), py::arg("seed") = 0, "Returns (medoids, assignment, total_cost).");

  m.def(
      "jaccard",
      [](const std::vector<int>& truth, const std::vector<int>& predicted) {
        py::list out;
        for (const JaccardScore& s : jaccard_best_match(truth, predicted)) {
          out.append(py::dict(py::arg("truth_label") = s.truth_label, py::arg("predicted_label") = s.best_predicted_label,
                              py::arg("size") = s.truth_size, py::arg("score") = s.score));
        }
        return out;
      },
      py::arg("truth"), py::arg("predicted"), "Best-match Jaccard score per ground-truth cluster.");

  m.def("wasserstein_gaussian", &wasserstein_gaussian, py::arg("a"), py::arg("b"));

  m.def(
      "run_pipeline",
      [](const std::string& config_json) {
        const PipelineConfig cfg = pipeline_config_from_json(nlohmann::json::parse(config_json));
        PipelineReport r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg);
        }
        py::dict out;
        out["n_points"] = r.n_points;
        out["final_loss"] = r.final_loss;
        out["edge_count"] = r.edge_count;
        out["component_sizes"] = r.component_sizes;
        if (r.jaccard) {
          std::vector<double> scores;
          for (const auto& s : *r.jaccard) scores.push_back(s.score);
          out["jaccard"] = scores;
        }
        return out;
      },
      py::arg("config_json"), "Runs the full pipeline from a JSON config string; artifacts go to its output_dir.");
}
