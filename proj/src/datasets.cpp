#include "laminar/datasets.hpp"

#include "laminar/random.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace laminar {

using nlohmann::json;

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::uniform_disk: return "uniform_disk";
    case DatasetKind::transformed_disk: return "transformed_disk";
    case DatasetKind::two_moons: return "two_moons";
    case DatasetKind::concentric_rings: return "concentric_rings";
    case DatasetKind::anisotropic_blobs: return "anisotropic_blobs";
    case DatasetKind::filament_clusters: return "filament_clusters";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (auto k : {DatasetKind::uniform_disk, DatasetKind::transformed_disk, DatasetKind::two_moons,
                 DatasetKind::concentric_rings, DatasetKind::anisotropic_blobs, DatasetKind::filament_clusters}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown dataset kind '" + std::string(name) + "'");
}

std::vector<BlobSpec> default_blobs() {
  auto cov = [](double a, double b, double c) {
    Matrix m(2, 2);
    m << a, b, b, c;
    return m;
  };
  return {
      {Vector{{-2.0, 0.0}}, cov(1.2, 0.9, 0.8)},
      {Vector{{2.0, 0.5}}, cov(0.9, -0.7, 0.7)},
      {Vector{{0.0, -2.5}}, cov(1.5, 0.0, 0.08)},
  };
}

namespace {

// Class sizes for `classes` groups: as even as possible, extras to the first.
std::vector<Index> split_sizes(Index n, std::size_t classes) {
  std::vector<Index> sizes(classes, n / static_cast<Index>(classes));
  for (Index r = 0; r < n % static_cast<Index>(classes); ++r) ++sizes[static_cast<std::size_t>(r)];
  return sizes;
}

RowMatrix sample_ball(Index n, int dim, Rng& rng) {
  RowMatrix pts(n, dim);
  for (Index i = 0; i < n; ++i) {
    Vector dir(dim);
    double norm = 0.0;
    do {
      for (int j = 0; j < dim; ++j) dir(j) = rng.normal();
      norm = dir.norm();
    } while (norm == 0.0);
    const double radius = std::pow(rng.uniform(), 1.0 / dim);
    pts.row(i) = (dir * (radius / norm)).transpose();
  }
  return pts;
}

}  // namespace

Dataset generate(const DatasetSpec& spec) {
  if (spec.n_points < 1) throw InputError("n_points must be at least 1");
  if (!(spec.noise >= 0.0)) throw InputError("noise must be non-negative");
  Dataset out;
  out.spec = spec;
  Rng rng(spec.seed);
  auto& cloud = out.cloud;
  const Index n = spec.n_points;

  switch (spec.kind) {
    case DatasetKind::uniform_disk:
    case DatasetKind::transformed_disk: {
      if (spec.dim < 1) throw InputError("dim must be positive");
      cloud.points = sample_ball(n, spec.dim, rng);
      const GroundTruthTransform t =
          spec.kind == DatasetKind::uniform_disk ? GroundTruthTransform::identity() : spec.transform;
      if (t.kind != GroundTruthTransform::Kind::identity) {
        for (Index i = 0; i < n; ++i) cloud.points.row(i) = t.apply(cloud.points.row(i).transpose()).transpose();
      }
      out.transform = t;
      break;
    }
    case DatasetKind::two_moons: {
      const auto sizes = split_sizes(n, 2);
      cloud.points.resize(n, 2);
      std::vector<int> labels;
      Index row = 0;
      for (int c = 0; c < 2; ++c) {
        for (Index i = 0; i < sizes[static_cast<std::size_t>(c)]; ++i, ++row) {
          const double t = std::numbers::pi * rng.uniform();
          double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
          double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
          x += spec.noise * rng.normal();
          y += spec.noise * rng.normal();
          cloud.points(row, 0) = x;
          cloud.points(row, 1) = y;
          labels.push_back(c);
        }
      }
      cloud.labels = std::move(labels);
      break;
    }
    case DatasetKind::concentric_rings: {
      if (spec.radii.empty()) throw InputError("concentric_rings needs at least one radius");
      for (double r : spec.radii) {
        if (!(r > 0.0)) throw InputError("ring radii must be positive");
      }
      const auto sizes = split_sizes(n, spec.radii.size());
      cloud.points.resize(n, 2);
      std::vector<int> labels;
      Index row = 0;
      for (std::size_t c = 0; c < spec.radii.size(); ++c) {
        for (Index i = 0; i < sizes[c]; ++i, ++row) {
          const double angle = 2.0 * std::numbers::pi * rng.uniform();
          const double radius = spec.radii[c] + spec.noise * rng.normal();
          cloud.points(row, 0) = radius * std::cos(angle);
          cloud.points(row, 1) = radius * std::sin(angle);
          labels.push_back(static_cast<int>(c));
        }
      }
      cloud.labels = std::move(labels);
      break;
    }
    case DatasetKind::anisotropic_blobs: {
      const auto blobs = spec.blobs.empty() ? default_blobs() : spec.blobs;
      const Index d = blobs.front().center.size();
      const auto sizes = split_sizes(n, blobs.size());
      cloud.points.resize(n, d);
      std::vector<int> labels;
      Index row = 0;
      for (std::size_t c = 0; c < blobs.size(); ++c) {
        const auto& blob = blobs[c];
        if (blob.center.size() != d || blob.covariance.rows() != d || blob.covariance.cols() != d) {
          throw InputError("blob centers and covariances must share one dimension");
        }
        Eigen::LLT<Matrix> llt(blob.covariance);
        if (llt.info() != Eigen::Success) throw InputError("blob covariance must be positive definite");
        const Matrix l = llt.matrixL();
        for (Index i = 0; i < sizes[c]; ++i, ++row) {
          Vector g(d);
          for (Index j = 0; j < d; ++j) g(j) = rng.normal();
          cloud.points.row(row) = (blob.center + l * g).transpose();
          labels.push_back(static_cast<int>(c));
        }
      }
      cloud.labels = std::move(labels);
      break;
    }
    case DatasetKind::filament_clusters: {
      // A curved filament (label 0) flanked by two compact clusters (1, 2).
      const auto sizes = split_sizes(n, 3);
      cloud.points.resize(n, 2);
      std::vector<int> labels;
      Index row = 0;
      for (Index i = 0; i < sizes[0]; ++i, ++row) {
        const double x = rng.uniform(-2.5, 2.5);
        cloud.points(row, 0) = x + 0.5 * spec.noise * rng.normal();
        cloud.points(row, 1) = 0.6 * std::sin(1.2 * x) + 0.5 * spec.noise * rng.normal();
        labels.push_back(0);
      }
      const double centers[2][2] = {{-1.2, 1.6}, {1.3, -1.6}};
      for (int c = 0; c < 2; ++c) {
        for (Index i = 0; i < sizes[static_cast<std::size_t>(c) + 1]; ++i, ++row) {
          cloud.points(row, 0) = centers[c][0] + 0.35 * rng.normal();
          cloud.points(row, 1) = centers[c][1] + 0.35 * rng.normal();
          labels.push_back(c + 1);
        }
      }
      cloud.labels = std::move(labels);
      break;
    }
  }
  return out;
}

json to_json(const GroundTruthTransform& t) {
  json j;
  j["kind"] = t.name();
  switch (t.kind) {
    case GroundTruthTransform::Kind::identity: break;
    case GroundTruthTransform::Kind::linear: {
      json rows = json::array();
      for (Index r = 0; r < t.matrix.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < t.matrix.cols(); ++c) row.push_back(t.matrix(r, c));
        rows.push_back(row);
      }
      j["matrix"] = rows;
      break;
    }
    case GroundTruthTransform::Kind::swirl:
    case GroundTruthTransform::Kind::radial: j["strength"] = t.strength; break;
    case GroundTruthTransform::Kind::bend:
      j["strength"] = t.strength;
      j["frequency"] = t.frequency;
      break;
  }
  return j;
}

GroundTruthTransform transform_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "identity") return GroundTruthTransform::identity();
    if (kind == "linear") {
      const auto& rows = j.at("matrix");
      const auto n = static_cast<Index>(rows.size());
      Matrix a(n, n);
      for (Index r = 0; r < n; ++r) {
        if (static_cast<Index>(rows[static_cast<std::size_t>(r)].size()) != n) throw InputError("matrix must be square");
        for (Index c = 0; c < n; ++c) a(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
      }
      return GroundTruthTransform::linear(a);
    }
    if (kind == "shear") return GroundTruthTransform::shear(j.value("strength", 1.0));
    if (kind == "stretch") return GroundTruthTransform::stretch(j.value("sx", 3.0), j.value("sy", 1.0));
    if (kind == "swirl") return GroundTruthTransform::swirl(j.value("strength", 1.5));
    if (kind == "radial") return GroundTruthTransform::radial(j.value("strength", 1.0));
    if (kind == "bend") return GroundTruthTransform::bend(j.value("strength", 0.4), j.value("frequency", 3.0));
    throw InputError("unknown transform kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid transform description: ") + e.what());
  }
}

json to_json(const DatasetSpec& spec) {
  json j;
  j["kind"] = to_string(spec.kind);
  j["n_points"] = spec.n_points;
  j["seed"] = spec.seed;
  j["rng"] = "xoshiro256** seeded via splitmix64";
  switch (spec.kind) {
    case DatasetKind::uniform_disk: j["dim"] = spec.dim; break;
    case DatasetKind::transformed_disk:
      j["dim"] = spec.dim;
      j["transform"] = to_json(spec.transform);
      break;
    case DatasetKind::two_moons:
    case DatasetKind::filament_clusters: j["noise"] = spec.noise; break;
    case DatasetKind::concentric_rings:
      j["noise"] = spec.noise;
      j["radii"] = spec.radii;
      break;
    case DatasetKind::anisotropic_blobs: {
      json blobs = json::array();
      for (const auto& b : spec.blobs.empty() ? default_blobs() : spec.blobs) {
        json cov = json::array();
        for (Index r = 0; r < b.covariance.rows(); ++r) {
          json row = json::array();
          for (Index c = 0; c < b.covariance.cols(); ++c) row.push_back(b.covariance(r, c));
          cov.push_back(row);
        }
        blobs.push_back({{"center", std::vector<double>(b.center.data(), b.center.data() + b.center.size())},
                         {"covariance", cov}});
      }
      j["blobs"] = blobs;
      break;
    }
  }
  return j;
}

DatasetSpec dataset_spec_from_json(const json& j) {
  try {
    DatasetSpec spec;
    spec.kind = parse_dataset_kind(j.at("kind").get<std::string>());
    spec.n_points = j.value("n_points", spec.n_points);
    spec.seed = j.value("seed", spec.seed);
    spec.dim = j.value("dim", spec.dim);
    spec.noise = j.value("noise", spec.noise);
    if (j.contains("radii")) spec.radii = j.at("radii").get<std::vector<double>>();
    if (j.contains("transform")) spec.transform = transform_from_json(j.at("transform"));
    if (j.contains("blobs")) {
      for (const auto& b : j.at("blobs")) {
        BlobSpec blob;
        const auto center = b.at("center").get<std::vector<double>>();
        blob.center = Eigen::Map<const Vector>(center.data(), static_cast<Index>(center.size()));
        const auto cov = b.at("covariance").get<std::vector<std::vector<double>>>();
        blob.covariance.resize(static_cast<Index>(cov.size()), static_cast<Index>(cov.size()));
        for (std::size_t r = 0; r < cov.size(); ++r) {
          if (cov[r].size() != cov.size()) throw InputError("blob covariance must be square");
          for (std::size_t c = 0; c < cov.size(); ++c) {
            blob.covariance(static_cast<Index>(r), static_cast<Index>(c)) = cov[r][c];
          }
        }
        spec.blobs.push_back(std::move(blob));
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid dataset description: ") + e.what());
  }
}

}  // namespace laminar
