#include "laminar/viz.hpp"

#include "laminar/density_graph.hpp"
#include "laminar/io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace laminar::viz {

namespace {

std::uint8_t channel(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

Rgb from_hsv(double hue_deg, double s, double v) {
  hue_deg = std::fmod(hue_deg, 360.0);
  if (hue_deg < 0) hue_deg += 360.0;
  const double c = v * s;
  const double hp = hue_deg / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {channel(r + m), channel(g + m), channel(b + m)};
}

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  auto mix = [t](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::lround(x + (static_cast<double>(y) - x) * t));
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Maps data coordinates into an SVG viewport (y up in data, down in SVG).
struct Canvas {
  Bounds b;
  double width = 600;
  double height = 600;
  double margin = 20;

  double sx(double x) const { return margin + (x - b.xmin) / (b.xmax - b.xmin) * (width - 2 * margin); }
  double sy(double y) const { return height - margin - (y - b.ymin) / (b.ymax - b.ymin) * (height - 2 * margin); }
  double scale() const { return std::min((width - 2 * margin) / (b.xmax - b.xmin), (height - 2 * margin) / (b.ymax - b.ymin)); }

  std::string open(const std::string& title) const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
           "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n<title>" + title +
           "</title>\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  }
};

void require_planar(const RowMatrix& data) {
  if (data.cols() != 2) throw InputError("figures are drawn for 2-D data only");
  if (data.rows() == 0) throw InputError("nothing to draw");
}

std::string cross(double x, double y, const std::string& colour) {
  return "<path d=\"M" + fmt(x - 7) + " " + fmt(y - 7) + " L" + fmt(x + 7) + " " + fmt(y + 7) + " M" + fmt(x - 7) +
         " " + fmt(y + 7) + " L" + fmt(x + 7) + " " + fmt(y - 7) + "\" stroke=\"" + colour +
         "\" stroke-width=\"3\"/>\n";
}

double point_radius(Index n) { return n > 2000 ? 1.6 : n > 500 ? 2.2 : 3.0; }

}  // namespace

std::string Rgb::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

TensorGlyph tensor_glyph(const Matrix& sigma, std::array<double, 2> center) {
  if (sigma.rows() != 2 || sigma.cols() != 2) throw ContractViolation("glyphs need a 2x2 tensor");
  require_spd(sigma, "tensor");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (sigma + sigma.transpose()));
  const double lmin = eig.eigenvalues()(0);
  const double lmax = eig.eigenvalues()(1);
  const Vector major = eig.eigenvectors().col(1);
  double angle = std::atan2(major(1), major(0));
  if (angle < 0.0) angle += std::numbers::pi;
  if (angle >= std::numbers::pi) angle -= std::numbers::pi;
  TensorGlyph g;
  g.center = center;
  g.angle = angle;
  g.major = std::sqrt(lmax);
  g.minor = std::sqrt(lmin);
  g.axis_ratio = std::sqrt(lmin / lmax);
  return g;
}

TensorColor tensor_to_color(const Matrix& sigma) {
  const TensorGlyph g = tensor_glyph(sigma);
  TensorColor c;
  c.angle = g.angle;
  c.axis_ratio = g.axis_ratio;
  c.hue = g.angle / std::numbers::pi;
  if (c.hue >= 1.0) c.hue = 0.0;
  c.saturation = 1.0 - g.axis_ratio;
  return c;
}

Rgb wheel_color(double hue, double saturation) {
  hue -= std::floor(hue);
  const double hue_deg = hue <= 0.5 ? 480.0 * hue : 240.0 + 240.0 * (hue - 0.5);
  return from_hsv(hue_deg, std::clamp(saturation, 0.0, 1.0), 1.0);
}

Rgb viridis(double t) {
  static constexpr Rgb stops[] = {{68, 1, 84},    {71, 44, 122},  {59, 81, 139},  {44, 113, 142}, {33, 144, 141},
                                  {39, 173, 129}, {92, 200, 99},  {170, 220, 50}, {253, 231, 37}};
  constexpr int last = static_cast<int>(std::size(stops)) - 1;
  t = std::clamp(t, 0.0, 1.0) * last;
  const int i = std::min(static_cast<int>(t), last - 1);
  return lerp(stops[i], stops[i + 1], t - i);
}

Rgb diverging(double value, double max_abs) {
  const double t = max_abs > 0.0 ? std::clamp(value / max_abs, -1.0, 1.0) : 0.0;
  constexpr Rgb blue{33, 102, 172};
  constexpr Rgb white{255, 255, 255};
  constexpr Rgb red{178, 24, 43};
  return t < 0.0 ? lerp(white, blue, -t) : lerp(white, red, t);
}

Rgb greyscale(double t) {
  const auto v = channel(std::clamp(t, 0.0, 1.0));
  return {v, v, v};
}

struct ContourEstimator::Impl {
  KdTree tree;
  std::vector<double> distances;
  Index k;
};

ContourEstimator::ContourEstimator(const RowMatrix& data, std::span<const double> distances, Index k) {
  if (static_cast<Index>(distances.size()) != data.rows()) throw InputError("one distance per data point is required");
  if (k < 1) throw InputError("contour k must be positive");
  impl_ = std::make_shared<const Impl>(
      Impl{KdTree(data), std::vector<double>(distances.begin(), distances.end()), std::min(k, data.rows())});
}

double ContourEstimator::operator()(double x, double y) const {
  const Vector q{{x, y}};
  const auto nb = impl_->tree.query(q, impl_->k);
  double acc = 0.0;
  int count = 0;
  for (const auto& n : nb) {
    const double d = impl_->distances[static_cast<std::size_t>(n.index)];
    if (std::isfinite(d)) {
      acc += d;
      ++count;
    }
  }
  return count ? acc / count : std::numeric_limits<double>::quiet_NaN();
}

Bounds padded_bounds(const RowMatrix& data, double padding) {
  require_planar(data);
  Bounds b{data.col(0).minCoeff(), data.col(0).maxCoeff(), data.col(1).minCoeff(), data.col(1).maxCoeff()};
  double wx = b.xmax - b.xmin;
  double wy = b.ymax - b.ymin;
  if (wx <= 0) wx = 1.0;
  if (wy <= 0) wy = 1.0;
  b.xmin -= padding * wx;
  b.xmax += padding * wx;
  b.ymin -= padding * wy;
  b.ymax += padding * wy;
  return b;
}

ContourGrid contour_grid(const RowMatrix& data, std::span<const double> distances, Index k, int resolution,
                         double padding) {
  if (resolution < 2) throw InputError("contour grid needs at least 2 samples per axis");
  ContourGrid grid;
  grid.bounds = padded_bounds(data, padding);
  grid.nx = resolution;
  grid.ny = resolution;
  grid.values.resize(resolution, resolution);
  const ContourEstimator est(data, distances, k);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) grid.values(j, i) = est(grid.x_at(i), grid.y_at(j));
  }
  return grid;
}

std::vector<Segment> iso_lines(const ContourGrid& grid, double level) {
  std::vector<Segment> out;
  auto interp = [level](double x0, double y0, double v0, double x1, double y1, double v1) {
    const double t = v1 == v0 ? 0.5 : (level - v0) / (v1 - v0);
    return std::array<double, 2>{x0 + t * (x1 - x0), y0 + t * (y1 - y0)};
  };
  for (int j = 0; j + 1 < grid.ny; ++j) {
    for (int i = 0; i + 1 < grid.nx; ++i) {
      const double v00 = grid.values(j, i), v10 = grid.values(j, i + 1);
      const double v01 = grid.values(j + 1, i), v11 = grid.values(j + 1, i + 1);
      if (!std::isfinite(v00) || !std::isfinite(v10) || !std::isfinite(v01) || !std::isfinite(v11)) continue;
      const double x0 = grid.x_at(i), x1 = grid.x_at(i + 1), y0 = grid.y_at(j), y1 = grid.y_at(j + 1);
      // Edge crossings: bottom, right, top, left.
      std::vector<std::array<double, 2>> pts;
      if ((v00 < level) != (v10 < level)) pts.push_back(interp(x0, y0, v00, x1, y0, v10));
      if ((v10 < level) != (v11 < level)) pts.push_back(interp(x1, y0, v10, x1, y1, v11));
      if ((v01 < level) != (v11 < level)) pts.push_back(interp(x0, y1, v01, x1, y1, v11));
      if ((v00 < level) != (v01 < level)) pts.push_back(interp(x0, y0, v00, x0, y1, v01));
      for (std::size_t p = 0; p + 1 < pts.size(); p += 2) {
        out.push_back({pts[p][0], pts[p][1], pts[p + 1][0], pts[p + 1][1]});
      }
    }
  }
  return out;
}

RatioValues ratio_values(std::span<const double> laminar_distances, std::span<const double> euclidean_distances,
                         Index query) {
  const auto n = static_cast<Index>(laminar_distances.size());
  if (static_cast<Index>(euclidean_distances.size()) != n) throw InputError("distance arrays must have equal length");
  if (query < 0 || query >= n) throw InputError("query index out of range");
  if (n < 2) throw InputError("ratio map needs at least two points");
  RatioValues out;
  Vector lam(n - 1), euc(n - 1);
  for (Index i = 0, r = 0; i < n; ++i) {
    if (i == query) continue;
    const double a = laminar_distances[static_cast<std::size_t>(i)];
    const double b = euclidean_distances[static_cast<std::size_t>(i)];
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw InputError("ratio map needs finite, strictly positive distances (point " + std::to_string(i) + ")");
    }
    lam(r) = std::log(a);
    euc(r) = std::log(b);
    out.indices.push_back(i);
    ++r;
  }
  auto standardize = [](Vector v) {
    const double mean = v.mean();
    v.array() -= mean;
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
    if (sd > 0.0) v /= sd;
    return v;
  };
  out.values = standardize(std::move(lam)) - standardize(std::move(euc));
  return out;
}

std::string distance_map_svg(const RowMatrix& data, std::span<const double> distances, Index query, Index k_contour,
                             int resolution) {
  require_planar(data);
  if (static_cast<Index>(distances.size()) != data.rows()) throw InputError("one distance per data point is required");
  Canvas cv;
  cv.b = padded_bounds(data);
  std::string svg = cv.open("distance map");
  const ContourGrid grid = contour_grid(data, distances, k_contour, resolution);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index j = 0; j < grid.values.rows(); ++j) {
    for (Index i = 0; i < grid.values.cols(); ++i) {
      if (std::isfinite(grid.values(j, i))) {
        lo = std::min(lo, grid.values(j, i));
        hi = std::max(hi, grid.values(j, i));
      }
    }
  }
  if (hi > lo) {
    constexpr int levels = 10;
    for (int l = 1; l < levels; ++l) {
      const double level = lo + (hi - lo) * l / levels;
      const std::string colour = greyscale(0.25 + 0.5 * l / levels).hex();
      for (const auto& s : iso_lines(grid, level)) {
        svg += "<line x1=\"" + fmt(cv.sx(s.x0)) + "\" y1=\"" + fmt(cv.sy(s.y0)) + "\" x2=\"" + fmt(cv.sx(s.x1)) +
               "\" y2=\"" + fmt(cv.sy(s.y1)) + "\" stroke=\"" + colour + "\" stroke-width=\"1\"/>\n";
      }
    }
  }
  double dmax = 0.0;
  for (double d : distances) {
    if (std::isfinite(d)) dmax = std::max(dmax, d);
  }
  const double r = point_radius(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    const double d = distances[static_cast<std::size_t>(i)];
    const Rgb colour = std::isfinite(d) ? viridis(dmax > 0 ? 1.0 - d / dmax : 1.0) : kUnreachableColor;
    svg += "<circle cx=\"" + fmt(cv.sx(data(i, 0))) + "\" cy=\"" + fmt(cv.sy(data(i, 1))) + "\" r=\"" + fmt(r) +
           "\" fill=\"" + colour.hex() + "\"/>\n";
  }
  if (query >= 0 && query < data.rows()) svg += cross(cv.sx(data(query, 0)), cv.sy(data(query, 1)), "#e41a1c");
  svg += "</svg>\n";
  return svg;
}

std::string ratio_map_svg(const RowMatrix& data, const RatioValues& ratio, Index query) {
  require_planar(data);
  Canvas cv;
  cv.b = padded_bounds(data);
  std::string svg = cv.open("standardized log distance ratio");
  const double max_abs = ratio.values.size() ? ratio.values.cwiseAbs().maxCoeff() : 0.0;
  const double r = point_radius(data.rows());
  for (std::size_t p = 0; p < ratio.indices.size(); ++p) {
    const Index i = ratio.indices[p];
    svg += "<circle cx=\"" + fmt(cv.sx(data(i, 0))) + "\" cy=\"" + fmt(cv.sy(data(i, 1))) + "\" r=\"" + fmt(r) +
           "\" fill=\"" + diverging(ratio.values(static_cast<Index>(p)), max_abs).hex() + "\"/>\n";
  }
  if (query >= 0 && query < data.rows()) svg += cross(cv.sx(data(query, 0)), cv.sy(data(query, 1)), "#2ca02c");
  svg += "</svg>\n";
  return svg;
}

std::string tensor_field_svg(const MetricTensorField& field) {
  require_planar(field.points);
  Canvas cv;
  cv.b = padded_bounds(field.points);
  std::string svg = cv.open("metric tensor field");
  std::vector<TensorGlyph> glyphs;
  std::vector<double> majors;
  for (Index i = 0; i < field.size(); ++i) {
    glyphs.push_back(tensor_glyph(field.tensors[static_cast<std::size_t>(i)], {field.points(i, 0), field.points(i, 1)}));
    majors.push_back(glyphs.back().major);
  }
  std::nth_element(majors.begin(), majors.begin() + static_cast<std::ptrdiff_t>(majors.size() / 2), majors.end());
  const double median_major = majors[majors.size() / 2];
  // Median glyph spans about 1.5% of the canvas; colour carries orientation and anisotropy.
  const double px_per_unit = median_major > 0 ? 0.015 * cv.width / median_major : 1.0;
  for (const auto& g : glyphs) {
    const Rgb colour = wheel_color(g.angle / std::numbers::pi, 1.0 - g.axis_ratio);
    const double cx = cv.sx(g.center[0]);
    const double cy = cv.sy(g.center[1]);
    const double rx = std::min(g.major * px_per_unit, 0.05 * cv.width);
    const double ry = std::max(rx * g.axis_ratio, 0.3);
    svg += "<ellipse cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" rx=\"" + fmt(rx) + "\" ry=\"" + fmt(ry) +
           "\" transform=\"rotate(" + fmt(-g.angle * 180.0 / std::numbers::pi) + " " + fmt(cx) + " " + fmt(cy) +
           ")\" fill=\"" + colour.hex() + "\" stroke=\"#555555\" stroke-width=\"0.3\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string scalar_map_svg(const RowMatrix& data, std::span<const double> values, const std::string& title) {
  require_planar(data);
  if (static_cast<Index>(values.size()) != data.rows()) throw InputError("one value per data point is required");
  Canvas cv;
  cv.b = padded_bounds(data);
  std::string svg = cv.open(title);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double r = point_radius(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    const double v = values[static_cast<std::size_t>(i)];
    const Rgb colour = !std::isfinite(v) ? kUnreachableColor : viridis(hi > lo ? (v - lo) / (hi - lo) : 0.0);
    svg += "<circle cx=\"" + fmt(cv.sx(data(i, 0))) + "\" cy=\"" + fmt(cv.sy(data(i, 1))) + "\" r=\"" + fmt(r) +
           "\" fill=\"" + colour.hex() + "\"/>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string colour_wheel_svg(int size) {
  const double c = size / 2.0;
  const double radius = size / 2.0 - 4;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) + "\" height=\"" +
                    std::to_string(size) + "\">\n<title>tensor colour wheel</title>\n";
  constexpr int sectors = 72;
  constexpr int rings = 8;
  for (int ring = rings; ring >= 1; --ring) {
    const double sat = static_cast<double>(ring) / rings;
    const double rr = radius * sat;
    for (int s = 0; s < sectors; ++s) {
      const double a0 = 2 * std::numbers::pi * s / sectors;
      const double a1 = 2 * std::numbers::pi * (s + 1) / sectors;
      // Wheel angle is twice the glyph orientation.
      const Rgb colour = wheel_color((s + 0.5) / sectors, sat);
      svg += "<path d=\"M" + fmt(c) + " " + fmt(c) + " L" + fmt(c + rr * std::cos(a0)) + " " +
             fmt(c - rr * std::sin(a0)) + " A" + fmt(rr) + " " + fmt(rr) + " 0 0 0 " + fmt(c + rr * std::cos(a1)) +
             " " + fmt(c - rr * std::sin(a1)) + " Z\" fill=\"" + colour.hex() + "\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

void write_figure(const std::filesystem::path& svg_path, const std::string& svg, const nlohmann::json& manifest) {
  std::filesystem::path manifest_path = svg_path;
  manifest_path.replace_extension(".json");
  io::write_file_atomic(svg_path, svg);
  io::write_file_atomic(manifest_path, manifest.dump(2) + "\n");
}

}  // namespace laminar::viz
