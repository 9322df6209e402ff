#pragma once

#include "laminar/common.hpp"
#include "laminar/metric_field.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace laminar {

enum class DatasetKind {
  uniform_disk,
  transformed_disk,
  two_moons,
  concentric_rings,
  anisotropic_blobs,
  filament_clusters,
};

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);  // throws InputError

struct BlobSpec {
  Vector center;
  Matrix covariance;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::uniform_disk;
  Index n_points = 1000;
  std::uint64_t seed = 0;
  int dim = 2;                              // uniform_disk / transformed_disk
  GroundTruthTransform transform;           // transformed_disk
  double noise = 0.1;                       // moons, rings, filament
  std::vector<double> radii{1.0, 2.5};      // concentric_rings
  std::vector<BlobSpec> blobs;              // anisotropic_blobs; empty selects the default trio
};

struct Dataset {
  DatasetSpec spec;
  PointCloud cloud;
  // Exact transform for transformed_disk (identity for uniform_disk).
  std::optional<GroundTruthTransform> transform;
};

/// Seeded sampling with the xoshiro256** generator from random.hpp.
/// uniform_disk draws radius U^(1/d) along a normalized Gaussian direction,
/// i.e. sqrt(U) in 2-D, so the disk is area-uniform.
Dataset generate(const DatasetSpec& spec);

std::vector<BlobSpec> default_blobs();

nlohmann::json to_json(const GroundTruthTransform& transform);
GroundTruthTransform transform_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

}  // namespace laminar
