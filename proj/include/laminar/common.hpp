#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace laminar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Point sets are stored one sample per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = std::int64_t;

// Error hierarchy. Every failure the library reports derives from Error so
// callers (the CLI in particular) can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied data or parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

// Violated precondition on a value that should have been produced correctly
// upstream (non-SPD tensor, mismatched shapes).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidModelError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class ConnectivityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

struct PointCloud {
  RowMatrix points;                         // N x d
  std::optional<std::vector<int>> labels;   // ground truth, when known

  Index size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
};

}  // namespace laminar
