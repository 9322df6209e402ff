#include "laminar/flow.hpp"

#include "laminar/io.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

namespace laminar {

FieldParams FieldParams::from_units(std::span<const PlanarUnitParams> units) {
  if (units.empty()) throw InputError("a velocity field needs at least one planar unit");
  const auto d = units.front().u.size();
  FieldParams f;
  const auto m = static_cast<Index>(units.size());
  f.u.resize(m, d);
  f.w.resize(m, d);
  f.b.resize(m);
  for (Index i = 0; i < m; ++i) {
    const auto& p = units[static_cast<std::size_t>(i)];
    if (p.u.size() != d || p.w.size() != d) throw InputError("planar units must share one dimension");
    f.u.row(i) = p.u.transpose();
    f.w.row(i) = p.w.transpose();
    f.b(i) = p.b;
  }
  f.u_dot_w = f.u.cwiseProduct(f.w).rowwise().sum();
  return f;
}

HyperNetwork HyperNetwork::initialize(int dim, int num_units, int hidden_width, Rng& rng) {
  if (dim < 1 || num_units < 1 || hidden_width < 1) {
    throw InputError("hypernetwork sizes must be positive");
  }
  HyperNetwork net;
  net.dim = dim;
  net.num_units = num_units;
  net.hidden_width = hidden_width;
  net.weights_in.resize(hidden_width);
  net.bias_in.resize(hidden_width);
  for (int i = 0; i < hidden_width; ++i) net.weights_in(i) = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < hidden_width; ++i) net.bias_in(i) = rng.uniform(-1.0, 1.0);
  const int p = net.output_size();
  net.weights_out.resize(p, hidden_width);
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < hidden_width; ++c) net.weights_out(r, c) = rng.uniform(-0.1, 0.1);
  }
  net.bias_out.resize(p);
  for (int r = 0; r < p; ++r) net.bias_out(r) = rng.uniform(-0.1, 0.1);
  return net;
}

Index HyperNetwork::parameter_count() const {
  return 2 * static_cast<Index>(hidden_width) + static_cast<Index>(output_size()) * (hidden_width + 1);
}

Vector HyperNetwork::hidden(double t) const { return (weights_in * t + bias_in).array().tanh().matrix(); }

Vector HyperNetwork::evaluate(double t) const { return weights_out * hidden(t) + bias_out; }

FieldParams decode_field(const Vector& raw, int dim, int num_units) {
  const int stride = 2 * dim + 1;
  if (raw.size() != static_cast<Index>(stride) * num_units) {
    throw InvalidModelError("hypernetwork output has wrong size");
  }
  if (!raw.allFinite()) throw InvalidModelError("hypernetwork produced non-finite flow parameters");
  FieldParams f;
  f.u.resize(num_units, dim);
  f.w.resize(num_units, dim);
  f.b.resize(num_units);
  for (int m = 0; m < num_units; ++m) {
    const Index off = static_cast<Index>(m) * stride;
    f.u.row(m) = raw.segment(off, dim).transpose();
    f.w.row(m) = raw.segment(off + dim, dim).transpose();
    f.b(m) = raw(off + 2 * dim);
  }
  f.u_dot_w = f.u.cwiseProduct(f.w).rowwise().sum();
  return f;
}

FieldParams HyperNetwork::field_at(double t) const { return decode_field(evaluate(t), dim, num_units); }

Vector HyperNetwork::flatten() const {
  Vector flat(parameter_count());
  Index pos = 0;
  flat.segment(pos, hidden_width) = weights_in;
  pos += hidden_width;
  flat.segment(pos, hidden_width) = bias_in;
  pos += hidden_width;
  for (Index r = 0; r < weights_out.rows(); ++r) {
    flat.segment(pos, hidden_width) = weights_out.row(r).transpose();
    pos += hidden_width;
  }
  flat.segment(pos, bias_out.size()) = bias_out;
  return flat;
}

void HyperNetwork::assign(const Vector& flat) {
  if (flat.size() != parameter_count()) throw InputError("parameter vector has wrong length");
  Index pos = 0;
  weights_in = flat.segment(pos, hidden_width);
  pos += hidden_width;
  bias_in = flat.segment(pos, hidden_width);
  pos += hidden_width;
  weights_out.resize(output_size(), hidden_width);
  for (Index r = 0; r < weights_out.rows(); ++r) {
    weights_out.row(r) = flat.segment(pos, hidden_width).transpose();
    pos += hidden_width;
  }
  bias_out = flat.segment(pos, output_size());
}

void FlowModel::validate() const {
  if (dim < 1) throw InvalidModelError("flow dimension must be positive");
  if (n_steps < 1) throw InvalidModelError("n_steps must be at least 1");
  if (!(t_end > t_start)) throw InvalidModelError("t_end must exceed t_start");
  if (hypernet.dim != dim) throw InvalidModelError("hypernetwork dimension does not match the model");
  if (hypernet.num_units < 1 || hypernet.hidden_width < 1) throw InvalidModelError("empty hypernetwork");
  if (hypernet.weights_in.size() != hypernet.hidden_width || hypernet.bias_in.size() != hypernet.hidden_width ||
      hypernet.weights_out.rows() != hypernet.output_size() ||
      hypernet.weights_out.cols() != hypernet.hidden_width || hypernet.bias_out.size() != hypernet.output_size()) {
    throw InvalidModelError("hypernetwork arrays have inconsistent shapes");
  }
  if (data_shift.size() != dim || data_scale.size() != dim) {
    throw InvalidModelError("standardization vectors must have length d");
  }
  if (!data_shift.allFinite() || !data_scale.allFinite() || (data_scale.array() <= 0.0).any()) {
    throw InvalidModelError("standardization scale must be finite and strictly positive");
  }
  if (!hypernet.flatten().allFinite()) throw InvalidModelError("non-finite hypernetwork parameters");
}

Vector FlowModel::standardize(const Vector& x) const {
  return ((x - data_shift).array() / data_scale.array()).matrix();
}

double FlowModel::standardization_log_det() const { return -data_scale.array().log().sum(); }

Velocity dynamics(const Vector& z, const FieldParams& field) {
  const Vector s = (field.w * z + field.b).array().tanh().matrix();
  Velocity v;
  v.dz_dt = field.u.transpose() * s;
  v.dlogp_dt = -((1.0 - s.array().square()) * field.u_dot_w.array()).sum();
  return v;
}

Velocity dynamics(const Vector& z, double t, const FlowModel& model) {
  return dynamics(z, model.hypernet.field_at(t));
}

Matrix dynamics_jacobian(const Vector& z, const FieldParams& field) {
  const Vector s = (field.w * z + field.b).array().tanh().matrix();
  const Vector ds = (1.0 - s.array().square()).matrix();
  return field.u.transpose() * ds.asDiagonal() * field.w;
}

Matrix dynamics_jacobian(const Vector& z, double t, const FlowModel& model) {
  return dynamics_jacobian(z, model.hypernet.field_at(t));
}

FlowSchedule::FlowSchedule(const FlowModel& model, int n_steps)
    : t0_(model.t_start), h_((model.t_end - model.t_start) / n_steps) {
  if (n_steps < 1) throw InvalidModelError("n_steps must be at least 1");
  nodes_.reserve(static_cast<std::size_t>(n_steps) + 1);
  mids_.reserve(static_cast<std::size_t>(n_steps));
  for (int n = 0; n <= n_steps; ++n) {
    const double t = n == n_steps ? model.t_end : t0_ + h_ * n;
    nodes_.push_back(model.hypernet.field_at(t));
    if (n < n_steps) mids_.push_back(model.hypernet.field_at(t0_ + h_ * (n + 0.5)));
  }
}

namespace {

struct StageEval {
  Velocity v;
  Matrix dj;  // A(y) * J_stage, only with jacobian
};

StageEval stage(const Vector& y, const Matrix* j_stage, const FieldParams& field) {
  StageEval out;
  const Vector s = (field.w * y + field.b).array().tanh().matrix();
  const Vector ds = (1.0 - s.array().square()).matrix();
  out.v.dz_dt = field.u.transpose() * s;
  out.v.dlogp_dt = -(ds.array() * field.u_dot_w.array()).sum();
  if (j_stage) out.dj = field.u.transpose() * (ds.asDiagonal() * (field.w * *j_stage));
  return out;
}

}  // namespace

FlowState integrate_standardized(const Vector& z0, const FlowSchedule& schedule, bool with_jacobian) {
  if (!z0.allFinite()) throw InputError("cannot integrate a non-finite point");
  const double h = schedule.step_size();
  const Index d = z0.size();
  FlowState st;
  st.z = z0;
  st.delta_logp = 0.0;
  if (with_jacobian) st.jacobian = Matrix::Identity(d, d);
  Matrix* jp = with_jacobian ? &st.jacobian : nullptr;

  for (int n = 0; n < schedule.steps(); ++n) {
    const auto& f0 = schedule.node(n);
    const auto& fm = schedule.midpoint(n);
    const auto& f1 = schedule.node(n + 1);

    StageEval k1 = stage(st.z, jp, f0);
    Matrix j2;
    if (jp) j2 = st.jacobian + 0.5 * h * k1.dj;
    StageEval k2 = stage(st.z + 0.5 * h * k1.v.dz_dt, jp ? &j2 : nullptr, fm);
    Matrix j3;
    if (jp) j3 = st.jacobian + 0.5 * h * k2.dj;
    StageEval k3 = stage(st.z + 0.5 * h * k2.v.dz_dt, jp ? &j3 : nullptr, fm);
    Matrix j4;
    if (jp) j4 = st.jacobian + h * k3.dj;
    StageEval k4 = stage(st.z + h * k3.v.dz_dt, jp ? &j4 : nullptr, f1);

    st.z += (h / 6.0) * (k1.v.dz_dt + 2.0 * k2.v.dz_dt + 2.0 * k3.v.dz_dt + k4.v.dz_dt);
    st.delta_logp += (h / 6.0) * (k1.v.dlogp_dt + 2.0 * k2.v.dlogp_dt + 2.0 * k3.v.dlogp_dt + k4.v.dlogp_dt);
    if (jp) st.jacobian += (h / 6.0) * (k1.dj + 2.0 * k2.dj + 2.0 * k3.dj + k4.dj);

    if (!st.z.allFinite() || !std::isfinite(st.delta_logp) || (jp && !st.jacobian.allFinite())) {
      throw DivergenceError("flow integration diverged at step " + std::to_string(n + 1) + " of " +
                                std::to_string(schedule.steps()),
                            n + 1);
    }
  }
  return st;
}

FlowState integrate(const Vector& x, const FlowModel& model, const FlowSchedule& schedule, bool with_jacobian) {
  if (x.size() != model.dim) {
    throw InputError("point has dimension " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(model.dim));
  }
  if (!x.allFinite()) throw InputError("cannot integrate a non-finite point");
  FlowState st = integrate_standardized(model.standardize(x), schedule, with_jacobian);
  if (with_jacobian) st.jacobian = st.jacobian * model.data_scale.cwiseInverse().asDiagonal();
  return st;
}

FlowState integrate(const Vector& x, const FlowModel& model, bool with_jacobian) {
  return integrate(x, model, FlowSchedule(model), with_jacobian);
}

double standard_normal_log_density(const Eigen::Ref<const Vector>& z) {
  return -0.5 * z.squaredNorm() - 0.5 * static_cast<double>(z.size()) * std::log(2.0 * std::numbers::pi);
}

double log_likelihood(const Vector& x, const FlowModel& model) {
  FlowState st = integrate(x, model, false);
  return standard_normal_log_density(st.z) - st.delta_logp + model.standardization_log_det();
}

RowMatrix standardize_rows(const RowMatrix& x, const FlowModel& model) {
  if (x.cols() != model.dim) {
    throw InputError("data has dimension " + std::to_string(x.cols()) + ", model expects " +
                     std::to_string(model.dim));
  }
  RowMatrix z = x;
  for (Index i = 0; i < z.rows(); ++i) {
    z.row(i) = ((x.row(i) - model.data_shift.transpose()).array() / model.data_scale.transpose().array()).matrix();
  }
  return z;
}

namespace {

void batch_velocity(const RowMatrix& y, const FieldParams& field, RowMatrix& dz, Vector& dl) {
  Matrix a = y * field.w.transpose();
  a.rowwise() += field.b.transpose();
  const Matrix s = a.array().tanh().matrix();
  dz = s * field.u;
  dl = -((1.0 - s.array().square()).matrix() * field.u_dot_w);
}

}  // namespace

BatchFlow integrate_batch_standardized(const RowMatrix& z0, const FlowSchedule& schedule) {
  const double h = schedule.step_size();
  BatchFlow out;
  out.z = z0;
  out.delta_logp = Vector::Zero(z0.rows());
  RowMatrix k1, k2, k3, k4;
  Vector l1, l2, l3, l4;
  for (int n = 0; n < schedule.steps(); ++n) {
    batch_velocity(out.z, schedule.node(n), k1, l1);
    batch_velocity(out.z + 0.5 * h * k1, schedule.midpoint(n), k2, l2);
    batch_velocity(out.z + 0.5 * h * k2, schedule.midpoint(n), k3, l3);
    batch_velocity(out.z + h * k3, schedule.node(n + 1), k4, l4);
    out.z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.delta_logp += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    if (!out.z.allFinite() || !out.delta_logp.allFinite()) {
      throw DivergenceError("flow integration diverged at step " + std::to_string(n + 1) + " of " +
                                std::to_string(schedule.steps()),
                            n + 1);
    }
  }
  return out;
}

BatchFlow integrate_batch(const RowMatrix& x, const FlowModel& model, int n_steps) {
  return integrate_batch_standardized(standardize_rows(x, model), FlowSchedule(model, n_steps));
}

BatchFlow integrate_batch(const RowMatrix& x, const FlowModel& model) {
  return integrate_batch(x, model, model.n_steps);
}

Vector log_likelihood_batch(const RowMatrix& x, const FlowModel& model, int n_steps) {
  BatchFlow flow = integrate_batch(x, model, n_steps);
  Vector ll(x.rows());
  const double log_det = model.standardization_log_det();
  for (Index i = 0; i < x.rows(); ++i) {
    ll(i) = standard_normal_log_density(flow.z.row(i).transpose()) - flow.delta_logp(i) + log_det;
  }
  return ll;
}

Vector log_likelihood_batch(const RowMatrix& x, const FlowModel& model) {
  return log_likelihood_batch(x, model, model.n_steps);
}

namespace {

constexpr unsigned char kCheckpointMagic[8] = {'L', 'A', 'M', 'F', 'L', 'O', 'W', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

std::vector<unsigned char> serialize_model(const FlowModel& model) {
  model.validate();
  const auto& net = model.hypernet;
  io::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.u32(static_cast<std::uint32_t>(net.num_units));
  w.u32(static_cast<std::uint32_t>(net.hidden_width));
  w.u32(static_cast<std::uint32_t>(model.n_steps));
  w.f64(model.t_start);
  w.f64(model.t_end);
  w.f64s({model.data_shift.data(), static_cast<std::size_t>(model.dim)});
  w.f64s({model.data_scale.data(), static_cast<std::size_t>(model.dim)});
  const Vector flat = net.flatten();
  w.f64s({flat.data(), static_cast<std::size_t>(flat.size())});
  return w.take();
}

FlowModel deserialize_model(std::span<const unsigned char> bytes) {
  io::ByteReader r(bytes);
  auto magic = r.bytes(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw IoError("not a flow checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  FlowModel model;
  model.dim = static_cast<int>(r.u32());
  const int units = static_cast<int>(r.u32());
  const int hidden = static_cast<int>(r.u32());
  model.n_steps = static_cast<int>(r.u32());
  if (model.dim < 1 || units < 1 || hidden < 1 || model.dim > 4096 || units > 1 << 20 || hidden > 1 << 20) {
    throw IoError("checkpoint header has implausible sizes");
  }
  model.t_start = r.f64();
  model.t_end = r.f64();
  model.data_shift.resize(model.dim);
  model.data_scale.resize(model.dim);
  for (int i = 0; i < model.dim; ++i) model.data_shift(i) = r.f64();
  for (int i = 0; i < model.dim; ++i) model.data_scale(i) = r.f64();
  model.hypernet.dim = model.dim;
  model.hypernet.num_units = units;
  model.hypernet.hidden_width = hidden;
  Vector flat(model.hypernet.parameter_count());
  for (Index i = 0; i < flat.size(); ++i) flat(i) = r.f64();
  model.hypernet.assign(flat);
  if (!r.exhausted()) throw IoError("trailing bytes after checkpoint payload");
  model.validate();
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const FlowModel& model) {
  io::write_file_atomic(path, serialize_model(model));
}

FlowModel load_checkpoint(const std::filesystem::path& path) { return deserialize_model(io::read_file(path)); }

}  // namespace laminar
