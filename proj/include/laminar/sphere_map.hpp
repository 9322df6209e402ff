#pragma once

#include "laminar/common.hpp"

namespace laminar {

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
// Both are returned so callers can keep full relative accuracy in the tail.
struct IncompleteGamma {
  double p;
  double q;
};
IncompleteGamma regularized_gamma(double a, double x);

/// Radial map from a standard normal in d dimensions to the uniform
/// distribution on the unit ball: a point at radius r lands at radius
/// F(r) = P(d/2, r^2/2)^(1/d), the d-th root of the chi CDF.
///
/// Radii beyond kSaturationRadius map to the largest double below one.
inline constexpr double kSaturationRadius = 40.0;
inline constexpr double kOriginRadius = 1e-8;

double radial_cdf(double r, int d);

// dF/dr
double radial_cdf_derivative(double r, int d);

Vector to_ball(const Vector& z);

// d to_ball / dz = g(r) I + g'(r)/r z z^T with g(r) = F(r)/r.
Matrix to_ball_jacobian(const Vector& z);

// Row-wise to_ball.
RowMatrix to_ball_rows(const RowMatrix& z);

}  // namespace laminar
