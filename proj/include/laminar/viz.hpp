#pragma once

#include "laminar/common.hpp"
#include "laminar/metric_field.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace laminar::viz {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::string hex() const;
  bool operator==(const Rgb&) const = default;
};

// Ellipse of the unit Mahalanobis ball of a 2x2 tensor: semi-axes are the
// square roots of its eigenvalues, angle is that of the major axis.
struct TensorGlyph {
  std::array<double, 2> center{};
  double angle = 0.0;       // [0, pi)
  double axis_ratio = 1.0;  // minor / major, in (0, 1]
  double major = 0.0;
  double minor = 0.0;
};

TensorGlyph tensor_glyph(const Matrix& sigma, std::array<double, 2> center = {0.0, 0.0});

struct TensorColor {
  double hue = 0.0;         // wheel position 2*angle / (2 pi), in [0, 1)
  double saturation = 0.0;  // 1 - axis_ratio
  double angle = 0.0;
  double axis_ratio = 1.0;
};

/// Horizontal major axis maps to wheel position 0 (red), vertical to 0.5
/// (blue). Orientation is headless, so angle and angle + pi coincide.
TensorColor tensor_to_color(const Matrix& sigma);

// Colour for a wheel position: hue runs red -> yellow -> green -> cyan -> blue
// over [0, 0.5] and blue -> magenta -> red over [0.5, 1); saturation 0 is white.
Rgb wheel_color(double hue, double saturation);
Rgb viridis(double t);                 // t in [0, 1], dark -> bright
Rgb diverging(double value, double max_abs);  // negative blue, zero white, positive red
Rgb greyscale(double t);

inline const Rgb kUnreachableColor{255, 0, 255};

// Mean of the reachable distance values at the k nearest data points of
// `where` (Euclidean, data space). NaN when none of them is reachable.
class ContourEstimator {
 public:
  ContourEstimator(const RowMatrix& data, std::span<const double> distances, Index k = 25);
  double operator()(double x, double y) const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

struct Bounds {
  double xmin, xmax, ymin, ymax;
};
Bounds padded_bounds(const RowMatrix& data, double padding = 0.1);

struct ContourGrid {
  Bounds bounds;
  int nx = 0;
  int ny = 0;
  RowMatrix values;  // ny x nx, row 0 at ymin

  double x_at(int i) const { return bounds.xmin + (bounds.xmax - bounds.xmin) * i / (nx - 1); }
  double y_at(int j) const { return bounds.ymin + (bounds.ymax - bounds.ymin) * j / (ny - 1); }
};

ContourGrid contour_grid(const RowMatrix& data, std::span<const double> distances, Index k = 25, int resolution = 200,
                         double padding = 0.1);

struct Segment {
  double x0, y0, x1, y1;
};
// Marching-squares iso-lines of the grid at `level`.
std::vector<Segment> iso_lines(const ContourGrid& grid, double level);

// Standardized log-distance difference per point, query excluded:
//   v_i = z(log d_lam)_i - z(log d_euc)_i, z = (x - mean) / std.
struct RatioValues {
  std::vector<Index> indices;  // every point except the query
  Vector values;
};
RatioValues ratio_values(std::span<const double> laminar_distances, std::span<const double> euclidean_distances,
                         Index query);

std::string distance_map_svg(const RowMatrix& data, std::span<const double> distances, Index query, Index k_contour = 25,
                             int resolution = 200);
std::string ratio_map_svg(const RowMatrix& data, const RatioValues& ratio, Index query);
std::string tensor_field_svg(const MetricTensorField& field);
std::string scalar_map_svg(const RowMatrix& data, std::span<const double> values, const std::string& title);
std::string colour_wheel_svg(int size = 240);

// Writes <stem>.svg and <stem>.json atomically.
void write_figure(const std::filesystem::path& svg_path, const std::string& svg, const nlohmann::json& manifest);

}  // namespace laminar::viz
