#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flock/controllers.hpp"
#include "flock/flocking.hpp"

namespace flock {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 20;  // trajectories per ADAM step
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t validation_interval = 1;  // epochs
  /// Per-tap scale of freshly initialized filters: tap k is stored divided by
  /// tap_gain^k. Only used when training starts from scratch.
  double tap_gain = 0.125;

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  std::vector<Matrix> grad;  // dLoss/dpredicted, same shapes as the input
};

/// Mean squared error over (t, agent, component).
LossResult imitation_loss(std::span<const Matrix> predicted,
                          std::span<const Matrix> expert);

struct OptimizerState {
  ControllerParams first_moment;
  ControllerParams second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(const ControllerParams& params);
};

/// One bias-corrected ADAM update, in place.
void adam_step(ControllerParams& params, const ControllerParams& grads,
               OptimizerState& state, const TrainConfig& config);

/// Teacher-forced loss and gradient for one recorded trajectory.
struct TrajectoryGradient {
  double loss = 0.0;
  ControllerParams grad;
};
TrajectoryGradient trajectory_gradient(const ControllerParams& params,
                                       const TrajectoryRecord& trajectory);

/// Mean teacher-forced loss over a set of trajectories (no gradients).
double mean_loss(const ControllerParams& params,
                 std::span<const TrajectoryRecord> trajectories);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ControllerParams best;
  ControllerParams last;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
  std::vector<EpochLog> log;
};

/// Imitation learning by minibatch ADAM on the training split; keeps the
/// parameters with the lowest validation loss.
TrainResult train(Arch arch, const Dataset& dataset, const TrainConfig& config,
                  std::size_t features, std::size_t taps);

/// Same, starting from given parameters.
TrainResult train_from(ControllerParams initial, const Dataset& dataset,
                       const TrainConfig& config);

struct GradCheckOptions {
  double step = 1e-6;
  /// Added to every analytic gradient entry; lets tests confirm that a wrong
  /// gradient is caught.
  double perturbation = 0.0;
  double tap_gain = 0.5;
};

struct TensorCheck {
  std::string name;
  double relative_error = 0.0;  // |analytic - numeric| / (|analytic| + |numeric|)
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  Arch arch = Arch::GC;
  double max_relative_error = 0.0;
  std::vector<TensorCheck> tensors;
};

/// Backward pass against central finite differences on a random instance
/// (random graphs, features and targets; squared loss).
GradCheckReport gradient_check(Arch arch, std::size_t features, std::size_t taps,
                               std::size_t agents, std::size_t steps,
                               std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace flock
