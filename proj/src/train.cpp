#include "laminar/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace laminar {

namespace {

// Activations recorded for one RK4 stage over a batch.
struct StageTape {
  RowMatrix y;  // stage input, N x d
  Matrix s;     // tanh(y W^T + b), N x M
};

struct Forward {
  RowMatrix z;   // final positions
  Vector dlogp;  // accumulated log-density change
  std::vector<StageTape> tape;  // 4 entries per step when recorded
};

void stage_velocity(const RowMatrix& y, const FieldParams& f, StageTape& rec, RowMatrix& dz, Vector& dl) {
  Matrix a = y * f.w.transpose();
  a.rowwise() += f.b.transpose();
  rec.s = a.array().tanh().matrix();
  dz = rec.s * f.u;
  dl = -((1.0 - rec.s.array().square()).matrix() * f.u_dot_w);
}

Forward run_forward(const RowMatrix& z0, const FlowSchedule& schedule, bool record) {
  const double h = schedule.step_size();
  Forward fw;
  fw.z = z0;
  fw.dlogp = Vector::Zero(z0.rows());
  if (record) fw.tape.reserve(4 * static_cast<std::size_t>(schedule.steps()));
  RowMatrix k1, k2, k3, k4;
  Vector l1, l2, l3, l4;
  StageTape t1, t2, t3, t4;
  for (int n = 0; n < schedule.steps(); ++n) {
    t1.y = fw.z;
    stage_velocity(t1.y, schedule.node(n), t1, k1, l1);
    t2.y = fw.z + 0.5 * h * k1;
    stage_velocity(t2.y, schedule.midpoint(n), t2, k2, l2);
    t3.y = fw.z + 0.5 * h * k2;
    stage_velocity(t3.y, schedule.midpoint(n), t3, k3, l3);
    t4.y = fw.z + h * k3;
    stage_velocity(t4.y, schedule.node(n + 1), t4, k4, l4);
    fw.z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    fw.dlogp += (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    if (record) {
      fw.tape.push_back(std::move(t1));
      fw.tape.push_back(std::move(t2));
      fw.tape.push_back(std::move(t3));
      fw.tape.push_back(std::move(t4));
    }
  }
  return fw;
}

double mean_nll(const Forward& fw, const FlowModel& model) {
  const double n = static_cast<double>(fw.z.rows());
  const double d = static_cast<double>(model.dim);
  const double quad = 0.5 * fw.z.squaredNorm() / n;
  const double dl = fw.dlogp.sum() / n;
  return quad + 0.5 * d * std::log(2.0 * std::numbers::pi) + dl - model.standardization_log_det();
}

// Adjoint of the planar field parameters at one time, in decode_field layout.
void pack_field_gradient(const Matrix& gu, const Matrix& gw, const Vector& gb, int dim, Vector& raw) {
  const int stride = 2 * dim + 1;
  for (Index m = 0; m < gu.rows(); ++m) {
    const Index off = m * stride;
    raw.segment(off, dim) += gu.row(m).transpose();
    raw.segment(off + dim, dim) += gw.row(m).transpose();
    raw(off + 2 * dim) += gb(m);
  }
}

// Vector-Jacobian product of one stage: given adjoints of the stage outputs
// (gz for dz/dt rows, gl for dlogp/dt, the same weight on every row), adds
// the parameter adjoint into raw_grad and returns the adjoint of y.
RowMatrix stage_vjp(const StageTape& rec, const FieldParams& f, const RowMatrix& gz, double gl, Vector& raw_grad) {
  const Matrix sp = (1.0 - rec.s.array().square()).matrix();
  const Matrix spp = (-2.0 * rec.s.array() * sp.array()).matrix();
  Matrix abar = (gz * f.u.transpose()).cwiseProduct(sp);
  abar -= gl * (spp.array().rowwise() * f.u_dot_w.transpose().array()).matrix();

  const Vector q = gl * sp.colwise().sum().transpose();
  Matrix gu = rec.s.transpose() * gz;
  gu -= q.asDiagonal() * f.w;
  Matrix gw = abar.transpose() * rec.y;
  gw -= q.asDiagonal() * f.u;
  const Vector gb = abar.colwise().sum().transpose();
  pack_field_gradient(gu, gw, gb, f.dim(), raw_grad);
  return abar * f.w;
}

void hypernet_vjp(const HyperNetwork& net, double t, const Vector& raw_grad, Vector& flat_grad) {
  const Index hw = net.hidden_width;
  const Vector hid = net.hidden(t);
  const Vector hbar = net.weights_out.transpose() * raw_grad;
  const Vector pre = hbar.cwiseProduct((1.0 - hid.array().square()).matrix());
  Index pos = 0;
  flat_grad.segment(pos, hw) += pre * t;
  pos += hw;
  flat_grad.segment(pos, hw) += pre;
  pos += hw;
  for (Index r = 0; r < net.weights_out.rows(); ++r) {
    flat_grad.segment(pos, hw) += raw_grad(r) * hid;
    pos += hw;
  }
  flat_grad.segment(pos, raw_grad.size()) += raw_grad;
}

}  // namespace

double mean_negative_log_likelihood(const FlowModel& model, const RowMatrix& x, int n_steps) {
  const FlowSchedule schedule(model, n_steps);
  return mean_nll(run_forward(standardize_rows(x, model), schedule, false), model);
}

LossGradient loss_and_gradient(const FlowModel& model, const RowMatrix& x, int n_steps) {
  if (x.rows() == 0) throw InputError("cannot evaluate the loss on an empty batch");
  const FlowSchedule schedule(model, n_steps);
  const double h = schedule.step_size();
  const RowMatrix z0 = standardize_rows(x, model);
  Forward fw = run_forward(z0, schedule, true);

  LossGradient out;
  out.loss = mean_nll(fw, model);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  const int p = model.hypernet.output_size();
  std::vector<Vector> node_grad(static_cast<std::size_t>(schedule.steps()) + 1, Vector::Zero(p));
  std::vector<Vector> mid_grad(static_cast<std::size_t>(schedule.steps()), Vector::Zero(p));

  // Loss = mean(0.5|z_T|^2 + dlogp_T) + const; dlogp never feeds back into z,
  // so its adjoint stays at 1/N throughout.
  RowMatrix zbar = fw.z * inv_n;
  const double lbar = inv_n;
  for (int n = schedule.steps() - 1; n >= 0; --n) {
    const auto base = static_cast<std::size_t>(4 * n);
    const StageTape& r1 = fw.tape[base];
    const StageTape& r2 = fw.tape[base + 1];
    const StageTape& r3 = fw.tape[base + 2];
    const StageTape& r4 = fw.tape[base + 3];
    auto& g0 = node_grad[static_cast<std::size_t>(n)];
    auto& gm = mid_grad[static_cast<std::size_t>(n)];
    auto& g1 = node_grad[static_cast<std::size_t>(n) + 1];

    RowMatrix k1bar = (h / 6.0) * zbar;
    RowMatrix k2bar = (h / 3.0) * zbar;
    RowMatrix k3bar = (h / 3.0) * zbar;
    const RowMatrix k4bar = (h / 6.0) * zbar;
    RowMatrix zprev = zbar;

    const RowMatrix y4bar = stage_vjp(r4, schedule.node(n + 1), k4bar, (h / 6.0) * lbar, g1);
    k3bar += h * y4bar;
    zprev += y4bar;
    const RowMatrix y3bar = stage_vjp(r3, schedule.midpoint(n), k3bar, (h / 3.0) * lbar, gm);
    k2bar += 0.5 * h * y3bar;
    zprev += y3bar;
    const RowMatrix y2bar = stage_vjp(r2, schedule.midpoint(n), k2bar, (h / 3.0) * lbar, gm);
    k1bar += 0.5 * h * y2bar;
    zprev += y2bar;
    zprev += stage_vjp(r1, schedule.node(n), k1bar, (h / 6.0) * lbar, g0);
    zbar = std::move(zprev);
  }

  out.gradient = Vector::Zero(model.hypernet.parameter_count());
  for (int n = 0; n <= schedule.steps(); ++n) {
    const double t = n == schedule.steps() ? model.t_end : schedule.time_at(n);
    hypernet_vjp(model.hypernet, t, node_grad[static_cast<std::size_t>(n)], out.gradient);
  }
  for (int n = 0; n < schedule.steps(); ++n) {
    hypernet_vjp(model.hypernet, schedule.time_at(n) + 0.5 * h, mid_grad[static_cast<std::size_t>(n)], out.gradient);
  }
  return out;
}

FlowModel initial_model(const PointCloud& data, const TrainConfig& config) {
  const Index n = data.size();
  const int d = data.dim();
  if (d < 1) throw InputError("data must have at least one coordinate");
  if (n < config.min_points) {
    throw InputError("training needs at least " + std::to_string(config.min_points) + " points, got " +
                     std::to_string(n));
  }
  if (config.epochs < 0 || config.train_steps < 1 || config.inference_steps < 1 || !(config.learning_rate > 0.0)) {
    throw InputError("invalid training configuration");
  }
  if (!data.points.allFinite()) throw InputError("training data contains non-finite values");
  FlowModel model;
  model.dim = d;
  model.n_steps = config.inference_steps;
  model.data_shift = data.points.colwise().mean().transpose();
  model.data_scale.resize(d);
  for (int j = 0; j < d; ++j) {
    const double var = (data.points.col(j).array() - model.data_shift(j)).square().mean();
    if (!(var > 0.0)) throw InputError("coordinate " + std::to_string(j + 1) + " has zero variance");
    model.data_scale(j) = std::sqrt(var);
  }
  Rng rng(config.seed);
  model.hypernet = HyperNetwork::initialize(d, config.num_units, config.hidden_width, rng);
  model.validate();
  return model;
}

TrainResult train(const PointCloud& data, const TrainConfig& config, const TrainProgress& progress) {
  FlowModel model = initial_model(data, config);
  TrainResult result;
  result.initial_model = model;

  const Index n = data.size();
  const bool full_batch = n <= config.full_batch_limit;
  const Index batch = full_batch ? n : std::min(config.batch_size, n);
  Rng shuffle_rng(derive_seed(config.seed, 1));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  Vector theta = model.hypernet.flatten();
  Vector m1 = Vector::Zero(theta.size());
  Vector m2 = Vector::Zero(theta.size());
  FlowModel last_finite = model;
  long adam_t = 0;
  const Index steps_per_epoch = full_batch ? 1 : (n + batch - 1) / batch;
  const double total_steps = static_cast<double>(steps_per_epoch) * std::max(config.epochs, 1);

  auto safe_loss_grad = [&](const RowMatrix& x) -> LossGradient {
    try {
      return loss_and_gradient(model, x, config.train_steps);
    } catch (const DivergenceError&) {
      return {std::numeric_limits<double>::quiet_NaN(), {}};
    } catch (const InvalidModelError&) {
      return {std::numeric_limits<double>::quiet_NaN(), {}};
    }
  };
  auto adam_step = [&](const Vector& grad) {
    ++adam_t;
    m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
    m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam_t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam_t));
    double lr = config.learning_rate;
    if (config.cosine_decay) {
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(adam_t - 1) / total_steps));
    }
    theta.array() -= lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + config.adam_epsilon);
    model.hypernet.assign(theta);
  };
  auto abort = [&](int epoch) {
    throw TrainingAborted("training loss became non-finite at epoch " + std::to_string(epoch), last_finite, epoch);
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (full_batch) {
      LossGradient lg = safe_loss_grad(data.points);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) abort(epoch);
      last_finite = model;
      result.loss_history.push_back(lg.loss);
      if (progress) progress(epoch, lg.loss);
      adam_step(lg.gradient);
      continue;
    }
    double epoch_loss = std::numeric_limits<double>::quiet_NaN();
    try {
      epoch_loss = mean_negative_log_likelihood(model, data.points, config.train_steps);
    } catch (const DivergenceError&) {
    }
    if (!std::isfinite(epoch_loss)) abort(epoch);
    last_finite = model;
    result.loss_history.push_back(epoch_loss);
    if (progress) progress(epoch, epoch_loss);
    // Fisher-Yates with the documented generator.
    for (Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Index>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    for (Index start = 0; start < n; start += batch) {
      const Index len = std::min(batch, n - start);
      RowMatrix xb(len, data.dim());
      for (Index r = 0; r < len; ++r) xb.row(r) = data.points.row(order[static_cast<std::size_t>(start + r)]);
      LossGradient lg = safe_loss_grad(xb);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) abort(epoch);
      adam_step(lg.gradient);
    }
  }

  double final_loss = std::numeric_limits<double>::quiet_NaN();
  try {
    final_loss = mean_negative_log_likelihood(model, data.points, config.train_steps);
  } catch (const DivergenceError&) {
  }
  if (!std::isfinite(final_loss)) abort(config.epochs);
  result.final_loss = final_loss;
  result.model = std::move(model);
  return result;
}

}  // namespace laminar
