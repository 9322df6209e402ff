#include "laminar/sphere_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace laminar {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 10000;

double log_prefactor(double a, double x) { return -x + a * std::log(x) - std::lgamma(a); }

// g(0+) = lim F(r)/r = Gamma(d/2 + 1)^(-1/d) / sqrt(2)
double origin_slope(int d) {
  return std::exp(-std::lgamma(0.5 * d + 1.0) / d) / std::numbers::sqrt2;
}

// log P(d/2, r^2/2), accurate on both ends.
double log_lower(const IncompleteGamma& g) { return g.p < 0.5 ? std::log(g.p) : std::log1p(-g.q); }

}  // namespace

IncompleteGamma regularized_gamma(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw DomainError("regularized_gamma requires a > 0 and x >= 0");
  if (x == 0.0) return {0.0, 1.0};
  if (std::isinf(x)) return {1.0, 0.0};
  if (x < a + 1.0) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kMaxIter; ++n) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    const double p = sum * std::exp(log_prefactor(a, x));
    return {p, 1.0 - p};
  }
  // Modified Lentz evaluation of the continued fraction for Q.
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  const double q = std::exp(log_prefactor(a, x)) * h;
  return {1.0 - q, q};
}

double radial_cdf(double r, int d) {
  if (d < 1) throw DomainError("dimension must be positive");
  if (!(r >= 0.0)) throw DomainError("radial_cdf requires r >= 0");
  if (r > kSaturationRadius) return std::nextafter(1.0, 0.0);
  if (r < kOriginRadius) return origin_slope(d) * r;
  const auto g = regularized_gamma(0.5 * d, 0.5 * r * r);
  return std::min(std::exp(log_lower(g) / d), std::nextafter(1.0, 0.0));
}

double radial_cdf_derivative(double r, int d) {
  if (d < 1) throw DomainError("dimension must be positive");
  if (!(r >= 0.0)) throw DomainError("radial_cdf_derivative requires r >= 0");
  if (r > kSaturationRadius) return 0.0;
  if (r < kOriginRadius) return origin_slope(d);
  const auto g = regularized_gamma(0.5 * d, 0.5 * r * r);
  const double log_p = log_lower(g);
  // chi density in d dimensions
  const double log_pdf = (d - 1) * std::log(r) - 0.5 * r * r - (0.5 * d - 1.0) * std::numbers::ln2 -
                         std::lgamma(0.5 * d);
  // F' = (1/d) P^(1/d - 1) pdf
  return std::exp((1.0 / d - 1.0) * log_p + log_pdf) / d;
}

Vector to_ball(const Vector& z) {
  const double r = z.norm();
  const int d = static_cast<int>(z.size());
  if (r == 0.0) return Vector::Zero(z.size());
  if (r < kOriginRadius) return origin_slope(d) * z;
  return z * (radial_cdf(r, d) / r);
}

Matrix to_ball_jacobian(const Vector& z) {
  const Index d = z.size();
  const double r = z.norm();
  const int di = static_cast<int>(d);
  if (r < kOriginRadius) return origin_slope(di) * Matrix::Identity(d, d);
  const double f = radial_cdf(r, di);
  const double fp = radial_cdf_derivative(r, di);
  const double g = f / r;
  const double gp = (fp * r - f) / (r * r);
  Matrix j = g * Matrix::Identity(d, d);
  j.noalias() += (gp / r) * z * z.transpose();
  return j;
}

RowMatrix to_ball_rows(const RowMatrix& z) {
  RowMatrix out(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) out.row(i) = to_ball(z.row(i).transpose()).transpose();
  return out;
}

}  // namespace laminar
