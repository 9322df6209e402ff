#pragma once

#include "laminar/common.hpp"
#include "laminar/random.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace laminar {

// Parameters of one planar unit u * tanh(w.z + b) at a fixed time.
struct PlanarUnitParams {
  Vector u;
  Vector w;
  double b = 0.0;
};

// All planar units of the velocity field at one time, stacked row-wise.
struct FieldParams {
  Matrix u;       // M x d
  Matrix w;       // M x d
  Vector b;       // M
  Vector u_dot_w; // M, cached row-wise u_m . w_m

  int num_units() const { return static_cast<int>(u.rows()); }
  int dim() const { return static_cast<int>(u.cols()); }
  PlanarUnitParams unit(int m) const { return {u.row(m).transpose(), w.row(m).transpose(), b(m)}; }

  static FieldParams from_units(std::span<const PlanarUnitParams> units);
};

/// Single-hidden-layer MLP mapping time t to the parameters of M planar units.
///
/// Output layout: unit m occupies entries [m*(2d+1), (m+1)*(2d+1)) as
/// (u_1..u_d, w_1..w_d, b).
struct HyperNetwork {
  int dim = 0;
  int num_units = 0;
  int hidden_width = 0;
  Vector weights_in;   // hidden_width (a hidden_width x 1 matrix)
  Vector bias_in;      // hidden_width
  Matrix weights_out;  // output_size x hidden_width
  Vector bias_out;     // output_size

  // Input-layer weights ~ U(-1, 1); output layer ~ U(-0.1, 0.1) so the
  // initial field is close to zero.
  static HyperNetwork initialize(int dim, int num_units, int hidden_width, Rng& rng);

  int output_size() const { return num_units * (2 * dim + 1); }
  Index parameter_count() const;

  Vector hidden(double t) const;
  Vector evaluate(double t) const;
  FieldParams field_at(double t) const;

  // Flat parameter vector: weights_in, bias_in, weights_out (row-major), bias_out.
  Vector flatten() const;
  void assign(const Vector& flat);
};

FieldParams decode_field(const Vector& raw, int dim, int num_units);

struct FlowModel {
  HyperNetwork hypernet;
  int dim = 0;
  double t_start = 0.0;
  double t_end = 1.0;
  int n_steps = 64;
  Vector data_shift;  // subtracted before the flow
  Vector data_scale;  // divided after the shift, strictly positive

  // Throws InvalidModelError when an invariant is broken.
  void validate() const;

  Vector standardize(const Vector& x) const;
  // log|det| of the standardization affine, i.e. -sum(log scale).
  double standardization_log_det() const;
};

struct FlowState {
  Vector z;
  double delta_logp = 0.0;
  Matrix jacobian;  // dz(t)/dz(0); empty when not requested
};

struct Velocity {
  Vector dz_dt;
  double dlogp_dt = 0.0;
};

Velocity dynamics(const Vector& z, const FieldParams& field);
Velocity dynamics(const Vector& z, double t, const FlowModel& model);

// d(dz/dt)/dz = sum_m tanh'(a_m) u_m w_m^T.
Matrix dynamics_jacobian(const Vector& z, const FieldParams& field);
Matrix dynamics_jacobian(const Vector& z, double t, const FlowModel& model);

/// Hypernetwork outputs precomputed at every RK4 stage time. The field
/// parameters depend on t only, so one schedule serves every point.
class FlowSchedule {
 public:
  FlowSchedule(const FlowModel& model, int n_steps);
  explicit FlowSchedule(const FlowModel& model) : FlowSchedule(model, model.n_steps) {}

  int steps() const { return static_cast<int>(nodes_.size()) - 1; }
  double step_size() const { return h_; }
  double time_at(int step) const { return t0_ + h_ * step; }
  const FieldParams& node(int step) const { return nodes_[step]; }
  const FieldParams& midpoint(int step) const { return mids_[step]; }

 private:
  double t0_;
  double h_;
  std::vector<FieldParams> nodes_;
  std::vector<FieldParams> mids_;
};

// Integrates one (already standardized) point over the schedule with RK4.
FlowState integrate_standardized(const Vector& z0, const FlowSchedule& schedule, bool with_jacobian);

// Standardizes x, then integrates from t_start to t_end. The returned
// jacobian is d z(t_end) / d x and therefore includes the standardization.
FlowState integrate(const Vector& x, const FlowModel& model, bool with_jacobian);
FlowState integrate(const Vector& x, const FlowModel& model, const FlowSchedule& schedule, bool with_jacobian);

double log_likelihood(const Vector& x, const FlowModel& model);

struct BatchFlow {
  RowMatrix z;        // N x d at t_end
  Vector delta_logp;  // N
};

// Vectorized integration of standardized rows (no jacobian).
BatchFlow integrate_batch_standardized(const RowMatrix& z0, const FlowSchedule& schedule);
BatchFlow integrate_batch(const RowMatrix& x, const FlowModel& model);
BatchFlow integrate_batch(const RowMatrix& x, const FlowModel& model, int n_steps);
RowMatrix standardize_rows(const RowMatrix& x, const FlowModel& model);

Vector log_likelihood_batch(const RowMatrix& x, const FlowModel& model);
Vector log_likelihood_batch(const RowMatrix& x, const FlowModel& model, int n_steps);

// log N(z; 0, I)
double standard_normal_log_density(const Eigen::Ref<const Vector>& z);

// Checkpoint file. Layout (all little-endian):
//   8 bytes   magic "LAMFLOW\0"
//   u32       format version (1)
//   u32 x4    dim, num_units, hidden_width, n_steps
//   f64 x2    t_start, t_end
//   f64 x d   data_shift
//   f64 x d   data_scale
//   f64 x H   weights_in
//   f64 x H   bias_in
//   f64 x P*H weights_out, row-major (P = num_units * (2*dim + 1))
//   f64 x P   bias_out
std::vector<unsigned char> serialize_model(const FlowModel& model);
FlowModel deserialize_model(std::span<const unsigned char> bytes);
void save_checkpoint(const std::filesystem::path& path, const FlowModel& model);
FlowModel load_checkpoint(const std::filesystem::path& path);

}  // namespace laminar
