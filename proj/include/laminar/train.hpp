#pragma once

#include "laminar/flow.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace laminar {

struct TrainConfig {
  int num_units = 32;
  int hidden_width = 32;
  int train_steps = 32;      // RK4 steps unrolled during training
  int inference_steps = 64;  // stored in the returned model
  int epochs = 200;
  double learning_rate = 5e-3;
  // Cosine decay of the step size from learning_rate to zero over all
  // optimizer steps; constant rate when false.
  bool cosine_decay = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  Index full_batch_limit = 4096;
  Index batch_size = 1024;
  Index min_points = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  FlowModel model;
  FlowModel initial_model;
  // Mean negative log-likelihood over the whole data set, evaluated with
  // the parameters held at the start of each epoch.
  std::vector<double> loss_history;
  double final_loss = 0.0;
};

// Raised when the loss becomes non-finite; carries the last parameters that
// produced a finite loss.
class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, FlowModel last_finite, int epoch)
      : Error(what), last_finite_(std::move(last_finite)), epoch_(epoch) {}
  const FlowModel& last_finite() const { return last_finite_; }
  int epoch() const { return epoch_; }

 private:
  FlowModel last_finite_;
  int epoch_;
};

struct LossGradient {
  double loss = 0.0;
  Vector gradient;  // matches HyperNetwork::flatten()
};

// Mean negative log-likelihood of raw (unstandardized) rows under the model
// and its gradient with respect to the hypernetwork parameters, obtained by
// reverse-mode differentiation through the unrolled RK4 steps.
LossGradient loss_and_gradient(const FlowModel& model, const RowMatrix& x, int n_steps);

double mean_negative_log_likelihood(const FlowModel& model, const RowMatrix& x, int n_steps);

// Fresh, untrained model whose standardization is fitted to the data.
FlowModel initial_model(const PointCloud& data, const TrainConfig& config);

using TrainProgress = std::function<void(int epoch, double loss)>;

TrainResult train(const PointCloud& data, const TrainConfig& config, const TrainProgress& progress = {});

}  // namespace laminar
