#pragma once

// Reference implementations used only by tests. None of these share code
// paths with the library routines they check.

#include "laminar/common.hpp"
#include "laminar/flow.hpp"
#include "laminar/random.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace laminar::testing {

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline double uniform01_cdf(double x) { return std::clamp(x, 0.0, 1.0); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Central differences of a vector map, column j = d f / d x_j.
inline Matrix finite_difference_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double eps) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (Index c = 0; c < x.size(); ++c) {
    Vector xp = x, xm = x;
    xp(c) += eps;
    xm(c) -= eps;
    j.col(c) = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return j;
}

inline double relative_matrix_error(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

// Floyd-Warshall on a dense weight matrix (+inf = no edge).
inline Matrix floyd_warshall(Matrix w) {
  const Index n = w.rows();
  for (Index i = 0; i < n; ++i) w(i, i) = std::min(w(i, i), 0.0);
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (w(i, k) + w(k, j) < w(i, j)) w(i, j) = w(i, k) + w(k, j);
      }
    }
  }
  return w;
}

// Brute-force kNN with (distance, index) ordering, self excluded.
inline std::vector<std::vector<Index>> brute_knn(const RowMatrix& pts, Index k) {
  std::vector<std::vector<Index>> out;
  for (Index i = 0; i < pts.rows(); ++i) {
    std::vector<std::pair<double, Index>> cand;
    for (Index j = 0; j < pts.rows(); ++j) {
      if (j != i) cand.emplace_back((pts.row(i) - pts.row(j)).squaredNorm(), j);
    }
    std::sort(cand.begin(), cand.end());
    std::vector<Index> row;
    for (Index c = 0; c < k; ++c) row.push_back(cand[static_cast<std::size_t>(c)].second);
    out.push_back(row);
  }
  return out;
}

inline Matrix random_spd(Rng& rng, int d, double min_eig = 0.1) {
  Matrix a(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
  }
  return a * a.transpose() + min_eig * Matrix::Identity(d, d);
}

inline Matrix random_rotation(Rng& rng, int d) {
  Matrix a(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

// A small random model with non-trivial field strength.
inline FlowModel random_model(Rng& rng, int d, int units, int hidden, int steps, double out_scale = 0.5) {
  FlowModel m;
  m.dim = d;
  m.n_steps = steps;
  m.data_shift = Vector::Zero(d);
  m.data_scale = Vector::Ones(d);
  for (int j = 0; j < d; ++j) {
    m.data_shift(j) = rng.uniform(-0.5, 0.5);
    m.data_scale(j) = rng.uniform(0.5, 2.0);
  }
  m.hypernet = HyperNetwork::initialize(d, units, hidden, rng);
  m.hypernet.weights_out *= out_scale / 0.1;
  m.hypernet.bias_out *= out_scale / 0.1;
  return m;
}

// Field with constant-in-time parameters: hidden layer unused (zero output weights).
inline FlowModel constant_field_model(const std::vector<PlanarUnitParams>& units) {
  const int d = static_cast<int>(units.front().u.size());
  FlowModel m;
  m.dim = d;
  m.n_steps = 16;
  m.data_shift = Vector::Zero(d);
  m.data_scale = Vector::Ones(d);
  m.hypernet.dim = d;
  m.hypernet.num_units = static_cast<int>(units.size());
  m.hypernet.hidden_width = 1;
  m.hypernet.weights_in = Vector::Zero(1);
  m.hypernet.bias_in = Vector::Zero(1);
  m.hypernet.weights_out = Matrix::Zero(m.hypernet.output_size(), 1);
  m.hypernet.bias_out = Vector::Zero(m.hypernet.output_size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Index off = static_cast<Index>(u) * (2 * d + 1);
    m.hypernet.bias_out.segment(off, d) = units[u].u;
    m.hypernet.bias_out.segment(off + d, d) = units[u].w;
    m.hypernet.bias_out(off + 2 * d) = units[u].b;
  }
  return m;
}

}  // namespace laminar::testing
