#include "laminar/io.hpp"
#include "laminar/metric_field.hpp"
#include "laminar/sphere_map.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace laminar;
using laminar::testing::finite_difference_jacobian;
using laminar::testing::random_rotation;
using laminar::testing::random_spd;
using laminar::testing::relative_matrix_error;

namespace {

// Best coupling N(0,a) x N(0,b) over cross-covariances L_a Q L_b^T with Q a
// 2D rotation or reflection, by angle scan plus golden-section refinement.
double w2_by_coupling_search(const Matrix& a, const Matrix& b) {
  const Matrix la = Eigen::LLT<Matrix>(a).matrixL();
  const Matrix lb = Eigen::LLT<Matrix>(b).matrixL();
  auto score = [&](double th, bool reflect) {
    Matrix q(2, 2);
    const double c = std::cos(th), s = std::sin(th);
    if (reflect) {
      q << c, s, s, -c;
    } else {
      q << c, -s, s, c;
    }
    return (la * q * lb.transpose()).trace();
  };
  double best = -1e300;
  for (bool reflect : {false, true}) {
    const int n = 720;
    int arg = 0;
    double top = -1e300;
    for (int i = 0; i < n; ++i) {
      const double v = score(2.0 * std::numbers::pi * i / n, reflect);
      if (v > top) {
        top = v;
        arg = i;
      }
    }
    double lo = 2.0 * std::numbers::pi * (arg - 1) / n, hi = 2.0 * std::numbers::pi * (arg + 1) / n;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
      const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
      if (score(m1, reflect) < score(m2, reflect)) {
        lo = m1;
      } else {
        hi = m2;
      }
    }
    best = std::max(best, score(0.5 * (lo + hi), reflect));
  }
  return std::sqrt(std::max(0.0, a.trace() + b.trace() - 2.0 * best));
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST_CASE("metric_from_jacobian inverts J^T J") {
  CHECK(metric_from_jacobian(Matrix::Identity(3, 3)).sigma.isApprox(Matrix::Identity(3, 3), 1e-15));
  const MetricTensor m = metric_from_jacobian(diag2(2.0, 1.0));
  CHECK(m.sigma(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m.sigma(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.sigma(0, 1) == 0.0);
  CHECK_FALSE(m.regularized);

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 3;
    Matrix j(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) j(r, c) = rng.normal();
    }
    const Matrix sigma = metric_from_jacobian(j).sigma;
    CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * sigma.cwiseAbs().maxCoeff());
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(sigma).eigenvalues().minCoeff() > 0.0);
    CHECK(relative_matrix_error(sigma * (j.transpose() * j), Matrix::Identity(d, d)) < 1e-8);
  }
}

TEST_CASE("metric_from_jacobian regularizes near-singular jacobians") {
  const MetricTensor m = metric_from_jacobian(diag2(1.0, 1e-7));
  CHECK(m.regularized);
  CHECK(m.sigma.allFinite());
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(m.sigma).eigenvalues().minCoeff() > 0.0);
  const MetricTensor zero = metric_from_jacobian(Matrix::Zero(2, 2));
  CHECK(zero.regularized);
  CHECK(zero.sigma.allFinite());
}

TEST_CASE("metric_tensor composes standardization, flow and ball map") {
  FlowModel m = laminar::testing::constant_field_model({{Vector::Zero(2), Vector{{1.0, 0.0}}, 0.0}});
  m.data_shift = Vector{{0.5, 0.0}};
  m.data_scale = Vector{{2.0, 0.5}};
  const Vector x{{1.5, 0.2}};
  const Vector z{{0.5, 0.4}};
  const Matrix j = to_ball_jacobian(z) * diag2(0.5, 2.0);
  const Matrix want = (j.transpose() * j).inverse();
  CHECK(relative_matrix_error(metric_tensor(x, m).sigma, want) < 1e-12);
}

TEST_CASE("evaluate_field is order independent across threads") {
  Rng rng(6);
  const FlowModel m = laminar::testing::random_model(rng, 2, 6, 6, 8);
  RowMatrix x(37, 2);
  for (Index i = 0; i < x.rows(); ++i) x.row(i) << rng.normal(), rng.normal();
  const FieldEvaluation one = evaluate_field(x, m, 1);
  const FieldEvaluation four = evaluate_field(x, m, 4);
  CHECK(one.pseudo_cdf == four.pseudo_cdf);
  for (std::size_t i = 0; i < one.field.tensors.size(); ++i) {
    CHECK(one.field.tensors[i] == four.field.tensors[i]);
    CHECK(one.field.tensors[i] == metric_tensor(x.row(static_cast<Index>(i)).transpose(), m).sigma);
  }
  CHECK(one.pseudo_cdf.rowwise().norm().maxCoeff() <= 1.0);
  CHECK_THROWS_AS(evaluate_field(RowMatrix::Zero(3, 3), m), InputError);
}

TEST_CASE("mahalanobis examples") {
  const Vector a{{0.3, -1.0}}, b{{2.3, 0.5}};
  CHECK(mahalanobis(a, b, Matrix::Identity(2, 2), Matrix::Identity(2, 2)) ==
        doctest::Approx((a - b).norm()).epsilon(1e-15));
  CHECK(mahalanobis(Vector{{1.0, 0.0}}, Vector::Zero(2), diag2(4.0, 1.0), diag2(4.0, 1.0)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  // Mean tensor of diag(6,1) and diag(2,1) is diag(4,1).
  CHECK(mahalanobis(Vector{{1.0, 0.0}}, Vector::Zero(2), diag2(6.0, 1.0), diag2(2.0, 1.0)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(mahalanobis(a, a, diag2(6.0, 1.0), diag2(2.0, 1.0)) == 0.0);
  CHECK_THROWS_AS(mahalanobis(a, b, diag2(1.0, -1.0), diag2(1.0, -1.0)), ContractViolation);
}

TEST_CASE("mahalanobis: symmetry, homogeneity and scale invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 4;
    const Matrix si = random_spd(rng, d), sj = random_spd(rng, d);
    Vector xi(d), xj(d);
    for (int k = 0; k < d; ++k) {
      xi(k) = rng.normal();
      xj(k) = rng.normal();
    }
    const double s = mahalanobis(xi, xj, si, sj);
    CHECK(s > 0.0);
    CHECK(std::abs(s - mahalanobis(xj, xi, sj, si)) <= 1e-14 * s);
    const Vector mid = xi + 2.5 * (xj - xi);
    CHECK(std::abs(mahalanobis(xi, mid, si, sj) - 2.5 * s) <= 1e-12 * s);
    const double c = std::exp(rng.uniform(-3.0, 3.0));
    CHECK(std::abs(mahalanobis(xi, xj, c * si, c * sj) - s) <= 1e-12 * s);
  }
}

TEST_CASE("ground truth metric for linear transforms is constant") {
  const auto stretch = GroundTruthTransform::stretch(3.0, 1.0);
  const auto shear = GroundTruthTransform::shear(1.0);
  Matrix shear_gt(2, 2);
  shear_gt << 2.0, 1.0, 1.0, 1.0;
  for (const Vector& p : {Vector{{0.0, 0.0}}, Vector{{0.3, -0.5}}, Vector{{-0.7, 0.1}}}) {
    CHECK(ground_truth_metric(stretch.apply(p), stretch).isApprox(diag2(9.0, 1.0), 1e-15));
    CHECK(ground_truth_metric(shear.apply(p), shear).isApprox(shear_gt, 1e-15));
    CHECK(ground_truth_metric(p, GroundTruthTransform::identity()).isApprox(Matrix::Identity(2, 2), 1e-15));
  }
  CHECK_THROWS_AS(ground_truth_metric(Vector{{5.0, 5.0}}, stretch), DomainError);
}

TEST_CASE("non-linear transforms: inverse and jacobian agree with apply") {
  const GroundTruthTransform ts[] = {GroundTruthTransform::swirl(1.5), GroundTruthTransform::radial(0.8),
                                     GroundTruthTransform::bend(0.4, 2.0), GroundTruthTransform::shear(1.0)};
  Rng rng(9);
  for (const auto& t : ts) {
    for (int trial = 0; trial < 100; ++trial) {
      const double r = std::sqrt(rng.uniform()) * 0.999;
      const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const Vector x{{r * std::cos(th), r * std::sin(th)}};
      const Vector y = t.apply(x);
      CHECK((t.inverse(y) - x).norm() < 1e-10);
      const Matrix fd = finite_difference_jacobian([&](const Vector& v) { return t.apply(v); }, x, 1e-6);
      CHECK(relative_matrix_error(t.jacobian(x), fd) < 1e-8);
      CHECK(t.jacobian(x).determinant() > 0.0);
      const Matrix j = t.jacobian(x);
      CHECK(ground_truth_metric(y, t).isApprox(j * j.transpose(), 1e-9));
    }
  }
  CHECK_THROWS_AS(GroundTruthTransform::radial(-0.5), InputError);
}

TEST_CASE("wasserstein_gaussian closed forms") {
  Rng rng(3);
  const Matrix a = random_spd(rng, 3);
  // The square root amplifies rounding in tr a + tr b - 2 tr(...).
  CHECK(wasserstein_gaussian(a, a) < 1e-6 * std::sqrt(a.trace()));
  CHECK(wasserstein_gaussian(4.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2)) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(wasserstein_gaussian(diag2(9.0, 1.0), diag2(1.0, 4.0)) == doctest::Approx(std::sqrt(4.0 + 1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(wasserstein_gaussian(diag2(1.0, 0.0), Matrix::Identity(2, 2)), ContractViolation);
}

TEST_CASE("wasserstein_gaussian matches a coupling search and behaves like a metric") {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = random_spd(rng, 2), b = random_spd(rng, 2), c = random_spd(rng, 2);
    const double ab = wasserstein_gaussian(a, b);
    CHECK(ab == doctest::Approx(w2_by_coupling_search(a, b)).epsilon(1e-6));
    CHECK(std::abs(ab - wasserstein_gaussian(b, a)) < 1e-10);
    CHECK(ab <= wasserstein_gaussian(a, c) + wasserstein_gaussian(c, b) + 1e-10);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 3;
    const Matrix a = random_spd(rng, d), b = random_spd(rng, d);
    const Matrix r = random_rotation(rng, d);
    CHECK(std::abs(wasserstein_gaussian(r * a * r.transpose(), r * b * r.transpose()) - wasserstein_gaussian(a, b)) <
          1e-10);
  }
}

TEST_CASE("spd_sqrt squares back") {
  Rng rng(5);
  const Matrix a = random_spd(rng, 4);
  const Matrix s = spd_sqrt(a);
  CHECK(relative_matrix_error(s * s, a) < 1e-12);
}

TEST_CASE("tensor field csv round trip is exact") {
  Rng rng(8);
  MetricTensorField f;
  f.points.resize(5, 2);
  for (Index i = 0; i < 5; ++i) {
    f.points.row(i) << rng.normal(), rng.normal() * 1e-7;
    f.tensors.push_back(random_spd(rng, 2));
    f.regularized.push_back(i == 3);
  }
  const auto path = std::filesystem::temp_directory_path() / "laminar_test_tensors.csv";
  io::write_file_atomic(path, field_to_csv(f));
  const MetricTensorField back = read_field_csv(path);
  std::filesystem::remove(path);
  CHECK(back.points == f.points);
  REQUIRE(back.tensors.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(back.tensors[i] == f.tensors[i]);
  CHECK(back.regularized == f.regularized);
}
