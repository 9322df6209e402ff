#include "laminar/metric_field.hpp"

#include "laminar/io.hpp"
#include "laminar/parallel.hpp"
#include "laminar/sphere_map.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace laminar {

void require_spd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ContractViolation(std::string(what) + " must be a square matrix");
  if (!m.allFinite()) throw ContractViolation(std::string(what) + " has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw ContractViolation(std::string(what) + " is not symmetric");
  }
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) throw ContractViolation(std::string(what) + " is not positive definite");
}

MetricTensor metric_from_jacobian(const Matrix& j_total) {
  const Index d = j_total.cols();
  if (!j_total.allFinite()) throw ContractViolation("jacobian has non-finite entries");
  Matrix gram = j_total.transpose() * j_total;
  gram = 0.5 * (gram + gram.transpose());
  MetricTensor out;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  double lo = eig.eigenvalues().minCoeff();
  double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    const double eps = 1e-10 * gram.trace() / static_cast<double>(d);
    gram += (eps > 0.0 ? eps : 1e-300) * Matrix::Identity(d, d);
    eig.compute(gram);
    out.regularized = true;
  }
  Vector inv = eig.eigenvalues().cwiseInverse();
  const double floor = 1e-12 * inv.maxCoeff();
  inv = inv.cwiseMax(floor);
  Matrix sigma = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  out.sigma = 0.5 * (sigma + sigma.transpose());
  return out;
}

Matrix total_jacobian(const FlowState& state) {
  if (state.jacobian.size() == 0) throw ContractViolation("flow state was integrated without its jacobian");
  return to_ball_jacobian(state.z) * state.jacobian;
}

MetricTensor metric_tensor(const Vector& x, const FlowModel& model) {
  return metric_from_jacobian(total_jacobian(integrate(x, model, true)));
}

FieldEvaluation evaluate_field(const RowMatrix& x, const FlowModel& model, int threads) {
  model.validate();
  if (x.cols() != model.dim) {
    throw InputError("data has dimension " + std::to_string(x.cols()) + ", model expects " +
                     std::to_string(model.dim));
  }
  const FlowSchedule schedule(model);
  const Index n = x.rows();
  FieldEvaluation out;
  out.pseudo_cdf.resize(n, model.dim);
  out.field.points = x;
  out.field.tensors.resize(static_cast<std::size_t>(n));
  std::vector<char> flags(static_cast<std::size_t>(n), 0);
  parallel_for(n, threads, [&](long long i) {
    const FlowState st = integrate(x.row(i).transpose(), model, schedule, true);
    out.pseudo_cdf.row(i) = to_ball(st.z).transpose();
    MetricTensor mt = metric_from_jacobian(total_jacobian(st));
    out.field.tensors[static_cast<std::size_t>(i)] = std::move(mt.sigma);
    flags[static_cast<std::size_t>(i)] = mt.regularized ? 1 : 0;
  });
  out.field.regularized.assign(flags.begin(), flags.end());
  return out;
}

double mahalanobis(const Vector& xi, const Vector& xj, const Matrix& sigma_i, const Matrix& sigma_j) {
  const Index d = xi.size();
  if (xj.size() != d || sigma_i.rows() != d || sigma_j.rows() != d) {
    throw ContractViolation("mahalanobis: dimension mismatch");
  }
  require_spd(sigma_i, "sigma_i");
  require_spd(sigma_j, "sigma_j");
  const Matrix mean = 0.5 * (sigma_i + sigma_j);
  Eigen::LLT<Matrix> llt(0.5 * (mean + mean.transpose()));
  if (llt.info() != Eigen::Success) throw ContractViolation("mean tensor is not positive definite");
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Vector y = llt.matrixL().solve(xi - xj);
  const double s2 = std::exp(log_det / static_cast<double>(d)) * y.squaredNorm();
  return std::sqrt(s2);
}

namespace {

Matrix rotation(double angle) {
  Matrix r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

Matrix rotation_derivative(double angle) {
  Matrix r(2, 2);
  r << -std::sin(angle), -std::cos(angle), std::cos(angle), -std::sin(angle);
  return r;
}

void require_planar(const GroundTruthTransform& t, Index d) {
  if (t.kind != GroundTruthTransform::Kind::identity && t.kind != GroundTruthTransform::Kind::linear && d != 2) {
    throw DomainError(t.name() + " transform is defined for 2-D points only");
  }
  if (t.kind == GroundTruthTransform::Kind::linear && t.matrix.cols() != d) {
    throw DomainError("linear transform dimension does not match the point");
  }
}

}  // namespace

GroundTruthTransform GroundTruthTransform::linear(Matrix a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InputError("linear transform must be square");
  if (std::abs(a.determinant()) < 1e-14) throw InputError("linear transform must be invertible");
  GroundTruthTransform t;
  t.kind = Kind::linear;
  t.matrix = std::move(a);
  return t;
}

GroundTruthTransform GroundTruthTransform::shear(double amount) {
  Matrix a(2, 2);
  a << 1.0, amount, 0.0, 1.0;
  return linear(a);
}

GroundTruthTransform GroundTruthTransform::stretch(double sx, double sy) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = sx;
  a(1, 1) = sy;
  return linear(a);
}

GroundTruthTransform GroundTruthTransform::swirl(double twist) {
  GroundTruthTransform t;
  t.kind = Kind::swirl;
  t.strength = twist;
  return t;
}

GroundTruthTransform GroundTruthTransform::radial(double beta) {
  // rho(r) = r + beta r^3 is monotone on [0, 1] iff beta > -1/3.
  if (!(beta > -1.0 / 3.0)) throw InputError("radial warp needs beta > -1/3");
  GroundTruthTransform t;
  t.kind = Kind::radial;
  t.strength = beta;
  return t;
}

GroundTruthTransform GroundTruthTransform::bend(double amplitude, double frequency) {
  GroundTruthTransform t;
  t.kind = Kind::bend;
  t.strength = amplitude;
  t.frequency = frequency;
  return t;
}

std::string GroundTruthTransform::name() const {
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::linear: return "linear";
    case Kind::swirl: return "swirl";
    case Kind::radial: return "radial";
    case Kind::bend: return "bend";
  }
  return "unknown";
}

Vector GroundTruthTransform::apply(const Vector& x) const {
  require_planar(*this, x.size());
  switch (kind) {
    case Kind::identity: return x;
    case Kind::linear: return matrix * x;
    case Kind::swirl: return rotation(strength * x.norm()) * x;
    case Kind::radial: return x * (1.0 + strength * x.squaredNorm());
    case Kind::bend: {
      Vector y = x;
      y(1) += strength * std::sin(frequency * x(0));
      return y;
    }
  }
  return x;
}

Matrix GroundTruthTransform::jacobian(const Vector& x) const {
  require_planar(*this, x.size());
  const Index d = x.size();
  switch (kind) {
    case Kind::identity: return Matrix::Identity(d, d);
    case Kind::linear: return matrix;
    case Kind::swirl: {
      const double r = x.norm();
      Matrix j = rotation(strength * r);
      if (r > 0.0) j += strength * (rotation_derivative(strength * r) * x) * (x.transpose() / r);
      return j;
    }
    case Kind::radial:
      return (1.0 + strength * x.squaredNorm()) * Matrix::Identity(d, d) + 2.0 * strength * x * x.transpose();
    case Kind::bend: {
      Matrix j = Matrix::Identity(2, 2);
      j(1, 0) = strength * frequency * std::cos(frequency * x(0));
      return j;
    }
  }
  return Matrix::Identity(d, d);
}

Vector GroundTruthTransform::inverse(const Vector& y) const {
  require_planar(*this, y.size());
  Vector x;
  switch (kind) {
    case Kind::identity: x = y; break;
    case Kind::linear: x = matrix.partialPivLu().solve(y); break;
    case Kind::swirl: x = rotation(-strength * y.norm()) * y; break;
    case Kind::radial: {
      const double rho = y.norm();
      if (rho == 0.0) {
        x = y;
        break;
      }
      // Newton on r + beta r^3 = rho, started from rho; safeguarded by bisection.
      double lo = 0.0;
      double hi = std::max(rho, 1.0) * 4.0;
      double r = rho;
      for (int it = 0; it < 200; ++it) {
        const double f = r + strength * r * r * r - rho;
        if (f > 0.0) hi = r; else lo = r;
        const double fp = 1.0 + 3.0 * strength * r * r;
        double next = fp > 0.0 ? r - f / fp : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - r) <= 1e-16 * std::max(1.0, r)) {
          r = next;
          break;
        }
        r = next;
      }
      x = y * (r / rho);
      break;
    }
    case Kind::bend:
      x = y;
      x(1) -= strength * std::sin(frequency * y(0));
      break;
  }
  if (!(x.norm() <= 1.0 + 1e-9)) throw DomainError("point lies outside the image of the unit disk");
  return x;
}

Matrix ground_truth_metric(const Vector& y, const GroundTruthTransform& transform) {
  const Vector x = transform.inverse(y);
  const Matrix j = transform.jacobian(x);
  if (std::abs(j.determinant()) < 1e-14) throw DomainError("transform jacobian is singular at the pre-image");
  Matrix s = j * j.transpose();
  return 0.5 * (s + s.transpose());
}

Matrix spd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

double wasserstein_gaussian(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ContractViolation("wasserstein_gaussian: dimension mismatch");
  require_spd(a, "first covariance");
  require_spd(b, "second covariance");
  const Matrix rb = spd_sqrt(b);
  const Matrix inner = rb * a * rb;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double w2 = a.trace() + b.trace() - 2.0 * cross;
  return std::sqrt(std::max(w2, 0.0));
}

std::string field_to_csv(const MetricTensorField& field) {
  const int d = field.dim();
  io::CsvTable table;
  for (int j = 0; j < d; ++j) table.header.push_back("x" + std::to_string(j + 1));
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) table.header.push_back("s" + std::to_string(r + 1) + "_" + std::to_string(c + 1));
  }
  table.header.emplace_back("regularized");
  for (Index i = 0; i < field.size(); ++i) {
    std::vector<std::string> row;
    for (int j = 0; j < d; ++j) row.push_back(io::format_double(field.points(i, j)));
    const Matrix& s = field.tensors[static_cast<std::size_t>(i)];
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) row.push_back(io::format_double(s(r, c)));
    }
    const bool reg = i < static_cast<Index>(field.regularized.size()) && field.regularized[static_cast<std::size_t>(i)];
    row.emplace_back(reg ? "1" : "0");
    table.rows.push_back(std::move(row));
  }
  return io::to_csv(table);
}

MetricTensorField read_field_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  const auto cols = static_cast<long>(table.header.size());
  // cols = d + d^2 + 1
  int d = 0;
  while (d + d * d + 1 < cols) ++d;
  if (d < 1 || d + d * d + 1 != cols || table.header.back() != "regularized") {
    throw InputError(path.string() + ": not a metric tensor field file");
  }
  MetricTensorField field;
  const auto n = static_cast<Index>(table.rows.size());
  field.points.resize(n, d);
  field.tensors.resize(static_cast<std::size_t>(n));
  field.regularized.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) field.points(i, j) = io::parse_double(row[static_cast<std::size_t>(j)]);
    Matrix s(d, d);
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) s(r, c) = io::parse_double(row[static_cast<std::size_t>(d + r * d + c)]);
    }
    field.tensors[static_cast<std::size_t>(i)] = std::move(s);
    field.regularized[static_cast<std::size_t>(i)] = row.back() == "1";
  }
  return field;
}

}  // namespace laminar
