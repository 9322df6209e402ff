#pragma once

#include "laminar/common.hpp"
#include "laminar/flow.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace laminar {

struct MetricTensor {
  Matrix sigma;
  bool regularized = false;  // Tikhonov fallback was applied
};

struct MetricTensorField {
  RowMatrix points;            // N x d, original data coordinates
  std::vector<Matrix> tensors; // N symmetric positive definite d x d
  std::vector<bool> regularized;

  Index size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Condition-number threshold beyond which J^T J is regularized.
inline constexpr double kMaxCondition = 1e12;

// Sigma = (J^T J)^{-1}, symmetrized, with an eigenvalue floor.
MetricTensor metric_from_jacobian(const Matrix& j_total);

// Composes the flow jacobian (standardization included) with the ball map
// jacobian at the flow endpoint.
Matrix total_jacobian(const FlowState& state);

MetricTensor metric_tensor(const Vector& x, const FlowModel& model);

// Pseudo-cdf coordinates and metric tensors for every row, from one
// integration per point.
struct FieldEvaluation {
  RowMatrix pseudo_cdf;
  MetricTensorField field;
};
FieldEvaluation evaluate_field(const RowMatrix& x, const FlowModel& model, int threads = 1);

// Throws ContractViolation unless m is symmetric positive definite.
void require_spd(const Matrix& m, const char* what);

/// Local distance between two points under the mean of their tensors:
///   s^2 = |S|^(1/d) * dx^T S^{-1} dx,  S = (sigma_i + sigma_j) / 2.
/// The determinant prefactor makes s invariant under uniform scaling of S.
double mahalanobis(const Vector& xi, const Vector& xj, const Matrix& sigma_i, const Matrix& sigma_j);

// Analytic transforms of the unit disk used as ground truth.
struct GroundTruthTransform {
  enum class Kind { identity, linear, swirl, radial, bend };
  Kind kind = Kind::identity;
  Matrix matrix;          // linear
  double strength = 0.0;  // swirl: twist per unit radius; radial: cubic coefficient; bend: amplitude
  double frequency = 1.0; // bend only

  static GroundTruthTransform identity() { return {}; }
  static GroundTruthTransform linear(Matrix a);
  static GroundTruthTransform shear(double amount);
  static GroundTruthTransform stretch(double sx, double sy);
  static GroundTruthTransform swirl(double twist);
  static GroundTruthTransform radial(double beta);
  static GroundTruthTransform bend(double amplitude, double frequency);

  Vector apply(const Vector& x) const;
  Matrix jacobian(const Vector& x) const;
  // Pre-image of y; throws DomainError when y is not in the image of the unit disk.
  Vector inverse(const Vector& y) const;

  std::string name() const;
};

// Sigma_gt = J_T J_T^T at the pre-image of y.
Matrix ground_truth_metric(const Vector& y, const GroundTruthTransform& transform);

// 2-Wasserstein distance between N(0, a) and N(0, b).
double wasserstein_gaussian(const Matrix& a, const Matrix& b);

Matrix spd_sqrt(const Matrix& m);

// Columnar CSV: x1..xd, s_11, s_12, ..., s_dd (row-major), regularized.
// Values are written in shortest round-trip form, so reading back is exact.
std::string field_to_csv(const MetricTensorField& field);
MetricTensorField read_field_csv(const std::filesystem::path& path);

}  // namespace laminar
