#include "flock/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "flock/errors.hpp"
#include "flock/work_queue.hpp"

namespace flock {

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || validation_interval == 0)
    throw ConfigError("epochs, batch size and validation interval must be positive");
  if (!(learning_rate > 0) || !(adam_epsilon > 0))
    throw ConfigError("learning rate and epsilon must be positive");
  if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
    throw ConfigError("ADAM forgetting factors must lie in (0, 1)");
}

LossResult imitation_loss(std::span<const Matrix> predicted,
                          std::span<const Matrix> expert) {
  if (predicted.size() != expert.size())
    throw InvalidArgument("imitation_loss: sequence lengths differ");
  std::size_t count = 0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    if (predicted[t].rows() != expert[t].rows() || predicted[t].cols() != expert[t].cols())
      throw InvalidArgument("imitation_loss: shape mismatch at step " + std::to_string(t));
    count += static_cast<std::size_t>(predicted[t].size());
  }
  LossResult out;
  if (count == 0) return out;
  const double scale = 1.0 / static_cast<double>(count);
  out.grad.reserve(predicted.size());
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    Matrix diff = predicted[t] - expert[t];
    out.value += diff.squaredNorm();
    out.grad.push_back(2.0 * scale * diff);
  }
  out.value *= scale;
  return out;
}

OptimizerState OptimizerState::for_params(const ControllerParams& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ControllerParams& params, const ControllerParams& grads,
               OptimizerState& state, const TrainConfig& config) {
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw InvalidArgument("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i]->rows() != g[i]->rows() || p[i]->cols() != g[i]->cols() ||
        p[i]->rows() != m[i]->rows() || p[i]->cols() != m[i]->cols())
      throw InvalidArgument("adam_step: shape mismatch");

  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = b1 * m[i]->array() + (1.0 - b1) * g[i]->array();
    v[i]->array() = b2 * v[i]->array() + (1.0 - b2) * g[i]->array().square();
    p[i]->array() -= config.learning_rate * (m[i]->array() / c1) /
                     ((v[i]->array() / c2).sqrt() + config.adam_epsilon);
  }
}

TrajectoryGradient trajectory_gradient(const ControllerParams& params,
                                       const TrajectoryRecord& trajectory) {
  const GraphSequence graphs = trajectory.graph_sequence();
  ForwardResult fwd = forward(params, graphs, trajectory.features);
  LossResult loss = imitation_loss(fwd.actions, trajectory.actions);
  return {loss.value, backward(params, fwd.tape, loss.grad)};
}

double mean_loss(const ControllerParams& params,
                 std::span<const TrajectoryRecord> trajectories) {
  if (trajectories.empty()) return 0.0;
  std::vector<double> losses(trajectories.size());
  parallel_for(trajectories.size(), [&](std::size_t i) {
    const TrajectoryRecord& tr = trajectories[i];
    Policy policy(params, tr.agents());
    std::vector<Matrix> predicted;
    predicted.reserve(tr.length());
    for (std::size_t t = 0; t < tr.length(); ++t)
      predicted.push_back(policy.step(tr.graphs[t], tr.features[t]));
    losses[i] = imitation_loss(predicted, tr.actions).value;
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) /
         static_cast<double>(losses.size());
}

namespace {

// Gradient averaged over a batch; summed in index order so the result does
// not depend on thread scheduling.
TrajectoryGradient batch_gradient(const ControllerParams& params,
                                  std::span<const TrajectoryRecord> all,
                                  std::span<const std::size_t> batch) {
  std::vector<TrajectoryGradient> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    parts[b] = trajectory_gradient(params, all[batch[b]]);
  });
  TrajectoryGradient total{0.0, params.zeros_like()};
  auto acc = total.grad.tensors();
  for (const TrajectoryGradient& part : parts) {
    total.loss += part.loss;
    auto src = part.grad.tensors();
    for (std::size_t i = 0; i < acc.size(); ++i) *acc[i] += *src[i];
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  total.loss *= scale;
  for (Matrix* m : acc) *m *= scale;
  return total;
}

}  // namespace

TrainResult train(Arch arch, const Dataset& dataset, const TrainConfig& config,
                  std::size_t features, std::size_t taps) {
  return train_from(init_params(arch, features, taps, config.seed, config.tap_gain), dataset,
                    config);
}

TrainResult train_from(ControllerParams initial, const Dataset& dataset,
                       const TrainConfig& config) {
  config.validate();
  if (dataset.train.empty()) throw ConfigError("training split is empty");
  if (dataset.valid.empty()) throw ConfigError("validation split is empty");
  initial.validate();

  TrainResult result;
  ControllerParams params = std::move(initial);
  OptimizerState opt = OptimizerState::for_params(params);
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);
  result.best_valid_loss = std::numeric_limits<double>::infinity();
  result.best = params;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      TrajectoryGradient g = batch_gradient(params, dataset.train, batch);
      adam_step(params, g.grad, opt, config);
      loss_sum += g.loss;
      ++batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(batches);
    entry.valid_loss = std::numeric_limits<double>::quiet_NaN();
    if (epoch % config.validation_interval == 0 || epoch == config.epochs) {
      entry.valid_loss = mean_loss(params, dataset.valid);
      if (entry.valid_loss < result.best_valid_loss) {
        result.best_valid_loss = entry.valid_loss;
        result.best = params;
        result.best_epoch = epoch;
      }
    }
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(entry);
  }
  result.last = std::move(params);
  return result;
}

namespace {

std::vector<std::string> tensor_names(const ControllerParams& p) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < p.input.size(); ++k) names.push_back("input[" + std::to_string(k) + "]");
  if (p.hidden)
    for (std::size_t k = 0; k < p.hidden->size(); ++k)
      names.push_back("hidden[" + std::to_string(k) + "]");
  if (p.output)
    for (std::size_t k = 0; k < p.output->size(); ++k)
      names.push_back("output[" + std::to_string(k) + "]");
  names.emplace_back("readout_weight");
  names.emplace_back("readout_bias");
  return names;
}

// Symmetric random graph sequence whose edges change over time.
GraphSequence random_graphs(std::size_t agents, std::size_t steps, std::mt19937_64& rng) {
  std::bernoulli_distribution link(0.45);
  std::vector<GraphSnapshot> snaps;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < agents; ++i)
      for (std::uint32_t j = i + 1; j < agents; ++j)
        if (link(rng)) {
          edges.push_back({i, j});
          edges.push_back({j, i});
        }
    snaps.emplace_back(agents, std::move(edges));
  }
  return GraphSequence(std::move(snaps));
}

}  // namespace

GradCheckReport gradient_check(Arch arch, std::size_t features, std::size_t taps,
                               std::size_t agents, std::size_t steps,
                               std::uint64_t seed, const GradCheckOptions& options) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_matrix = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
  };

  const GraphSequence graphs = random_graphs(agents, steps, rng);
  const auto n = static_cast<Eigen::Index>(agents);
  std::vector<Matrix> inputs, targets;
  for (std::size_t t = 0; t < steps; ++t) {
    inputs.push_back(0.5 * random_matrix(n, kFeatureDim));
    targets.push_back(random_matrix(n, kActionDim));
  }
  ControllerParams params = init_params(arch, features, taps, seed + 1, options.tap_gain);
  // Nonzero bias so the readout bias gradient is exercised away from zero.
  params.readout_bias = 0.1 * random_matrix(1, kActionDim);

  auto loss_at = [&](const ControllerParams& p) {
    return imitation_loss(forward(p, graphs, inputs).actions, targets).value;
  };

  ForwardResult fwd = forward(params, graphs, inputs);
  const LossResult loss = imitation_loss(fwd.actions, targets);
  ControllerParams analytic = backward(params, fwd.tape, loss.grad);
  if (options.perturbation != 0.0)
    for (Matrix* m : analytic.tensors()) m->array() += options.perturbation;

  GradCheckReport report;
  report.arch = arch;
  const auto names = tensor_names(params);
  auto p_tensors = params.tensors();
  auto a_tensors = analytic.tensors();
  for (std::size_t i = 0; i < p_tensors.size(); ++i) {
    Matrix& theta = *p_tensors[i];
    Matrix numeric(theta.rows(), theta.cols());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double saved = theta.data()[j];
      theta.data()[j] = saved + options.step;
      const double up = loss_at(params);
      theta.data()[j] = saved - options.step;
      const double down = loss_at(params);
      theta.data()[j] = saved;
      numeric.data()[j] = (up - down) / (2.0 * options.step);
    }
    const Matrix& a = *a_tensors[i];
    const double denom = a.norm() + numeric.norm();
    TensorCheck check;
    check.name = names[i];
    check.relative_error = denom > 0.0 ? (a - numeric).norm() / denom : 0.0;
    check.max_abs_error = (a - numeric).cwiseAbs().maxCoeff();
    report.max_relative_error = std::max(report.max_relative_error, check.relative_error);
    report.tensors.push_back(std::move(check));
  }
  return report;
}

}  // namespace flock
