#include "flock/flocking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "flock/errors.hpp"
#include "flock/work_queue.hpp"

namespace flock {

namespace {

// Inverse-power terms use at least this distance.
constexpr double kDistanceFloor = 1e-6;
constexpr int kMaxPlacementAttempts = 1000;

Eigen::Vector2d row2(const Matrix& m, Eigen::Index i) { return {m(i, 0), m(i, 1)}; }

}  // namespace

std::size_t FlockingConfig::steps() const {
  return static_cast<std::size_t>(std::llround(duration / sampling_time));
}

void FlockingConfig::validate() const {
  if (n_agents < 2) throw ConfigError("need at least two agents");
  if (!(sampling_time > 0) || !(duration > 0) || !(comm_radius > 0) ||
      !(max_accel > 0) || !(vel_range >= 0) || !(bias_range >= 0) ||
      !(min_init_dist > 0) || !(potential_cutoff > 0) || !(placement_spacing > 0))
    throw ConfigError("flocking constants must be positive");
  if (!(min_init_dist < comm_radius))
    throw ConfigError("minimum initial distance must be below the communication radius");
  if (steps() == 0) throw ConfigError("duration shorter than one sampling interval");
}

Matrix clip_actions(const Matrix& actions, double max_accel) {
  return actions.cwiseMax(-max_accel).cwiseMin(max_accel);
}

SwarmState step_dynamics(const SwarmState& state, const Matrix& actions,
                         double max_accel) {
  if (actions.rows() != state.positions.rows() || actions.cols() != 2)
    throw InvalidArgument("step_dynamics: action shape mismatch");
  if (!actions.allFinite() || !state.positions.allFinite() ||
      !state.velocities.allFinite())
    throw InvalidArgument("step_dynamics: non-finite input");
  const Matrix u = clip_actions(actions, max_accel);
  const double ts = state.sampling_time;
  SwarmState next = state;
  next.positions = u * (ts * ts / 2.0) + state.velocities * ts + state.positions;
  next.velocities = u * ts + state.velocities;
  next.time_index = state.time_index + 1;
  return next;
}

GraphSnapshot build_comm_graph(const Matrix& positions, double radius) {
  if (!(radius > 0)) throw InvalidArgument("communication radius must be positive");
  const Eigen::Index n = positions.rows();
  const double r2 = radius * radius;
  std::vector<Edge> edges;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = positions(i, 0) - positions(j, 0);
      const double dy = positions(i, 1) - positions(j, 1);
      if (dx * dx + dy * dy <= r2) {
        edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
        edges.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i)});
      }
    }
  }
  return GraphSnapshot(static_cast<std::size_t>(n), std::move(edges));
}

double cost(const Matrix& velocities) {
  if (velocities.rows() == 0) throw InvalidArgument("cost: empty team");
  const Eigen::RowVectorXd mean = velocities.colwise().mean();
  return (velocities.rowwise() - mean).rowwise().squaredNorm().mean();
}

double collision_potential(const Eigen::Vector2d& r_i, const Eigen::Vector2d& r_j,
                           double cutoff) {
  const double d = std::max((r_i - r_j).norm(), kDistanceFloor);
  const double s = std::min(d, cutoff);
  return 1.0 / (s * s) - std::log(s * s);
}

Eigen::Vector2d potential_gradient(const Eigen::Vector2d& r_i,
                                   const Eigen::Vector2d& r_j, double cutoff) {
  const Eigen::Vector2d rij = r_i - r_j;
  const double dist = rij.norm();
  if (dist > cutoff) return Eigen::Vector2d::Zero();
  const double d = std::max(dist, kDistanceFloor);
  const double d2 = d * d;
  return -2.0 * rij / (d2 * d2) - 2.0 * rij / d2;
}

Matrix expert_action(const SwarmState& state, double cutoff) {
  const Eigen::Index n = state.positions.rows();
  if (n < 2) throw InvalidArgument("expert_action: need at least two agents");
  // sum_j (v_i - v_j) = N v_i - sum_j v_j
  const Eigen::RowVectorXd v_sum = state.velocities.colwise().sum();
  Matrix u = -static_cast<double>(n) * state.velocities;
  u.rowwise() += v_sum;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d ri = row2(state.positions, i);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::Vector2d g = potential_gradient(ri, row2(state.positions, j), cutoff);
      // Antisymmetric in the pair.
      u(i, 0) -= g.x();
      u(i, 1) -= g.y();
      u(j, 0) += g.x();
      u(j, 1) += g.y();
    }
  }
  return u;
}

Matrix local_features(const SwarmState& state, const GraphSnapshot& graph) {
  const Eigen::Index n = state.positions.rows();
  if (graph.size() != static_cast<std::size_t>(n))
    throw InvalidArgument("local_features: graph size mismatch");
  Matrix x = Matrix::Zero(n, kFeatureDim);
  const SparseMatrix& s = graph.matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(s, i); it; ++it) {
      const Eigen::Index j = it.col();
      const double dvx = state.velocities(i, 0) - state.velocities(j, 0);
      const double dvy = state.velocities(i, 1) - state.velocities(j, 1);
      const double rx = state.positions(i, 0) - state.positions(j, 0);
      const double ry = state.positions(i, 1) - state.positions(j, 1);
      const double d = std::max(std::sqrt(rx * rx + ry * ry), kDistanceFloor);
      const double d2 = d * d;
      const double d4 = d2 * d2;
      x(i, 0) += dvx;
      x(i, 1) += dvy;
      x(i, 2) += rx / d4;
      x(i, 3) += ry / d4;
      x(i, 4) += rx / d2;
      x(i, 5) += ry / d2;
    }
  }
  return x;
}

SwarmState sample_initial_state(const FlockingConfig& config, std::mt19937_64& rng) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(config.n_agents);
  const double disc = config.placement_spacing * std::sqrt(static_cast<double>(n));
  const double min_d2 = config.min_init_dist * config.min_init_dist;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SwarmState state;
  state.sampling_time = config.sampling_time;
  state.positions = Matrix::Zero(n, 2);
  bool placed = false;
  for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double radius = disc * std::sqrt(unit(rng));
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      state.positions(i, 0) = radius * std::cos(angle);
      state.positions(i, 1) = radius * std::sin(angle);
    }
    bool spaced = true;
    for (Eigen::Index i = 0; i < n && spaced; ++i)
      for (Eigen::Index j = i + 1; j < n && spaced; ++j)
        spaced = (state.positions.row(i) - state.positions.row(j)).squaredNorm() >= min_d2;
    placed = spaced && build_comm_graph(state.positions, config.comm_radius).is_connected();
  }
  if (!placed)
    throw ConfigError("could not place " + std::to_string(n) + " agents after " +
                      std::to_string(kMaxPlacementAttempts) +
                      " attempts; disc too dense or too sparse");

  std::uniform_real_distribution<double> vel(-config.vel_range, config.vel_range);
  std::uniform_real_distribution<double> bias(-config.bias_range, config.bias_range);
  state.velocities = Matrix::Zero(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    state.velocities(i, 0) = vel(rng);
    state.velocities(i, 1) = vel(rng);
  }
  const double bx = bias(rng);
  const double by = bias(rng);
  state.velocities.col(0).array() += bx;
  state.velocities.col(1).array() += by;
  return state;
}

RolloutResult rollout(ActionSource& controller, const SwarmState& initial,
                      const FlockingConfig& config) {
  const std::size_t steps = config.steps();
  RolloutResult out;
  TrajectoryRecord& rec = out.trajectory;
  rec.positions.reserve(steps);
  rec.velocities.reserve(steps);
  rec.features.reserve(steps);
  rec.actions.reserve(steps);
  rec.graphs.reserve(steps);
  out.cost.per_step.reserve(steps);

  SwarmState state = initial;
  state.sampling_time = config.sampling_time;
  for (std::size_t t = 0; t < steps; ++t) {
    GraphSnapshot graph = build_comm_graph(state.positions, config.comm_radius);
    Matrix features = local_features(state, graph);
    Matrix u = clip_actions(controller.act(state, graph, features), config.max_accel);
    const double c = cost(state.velocities);
    out.cost.per_step.push_back(c);
    out.cost.total += c;
    rec.positions.push_back(state.positions);
    rec.velocities.push_back(state.velocities);
    rec.features.push_back(std::move(features));
    rec.graphs.push_back(std::move(graph));
    state = step_dynamics(state, u, config.max_accel);
    rec.actions.push_back(std::move(u));
  }
  return out;
}

std::mt19937_64 trajectory_rng(std::uint64_t seed, Split split, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split) + 1u,
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return std::mt19937_64(seq);
}

namespace {

std::vector<TrajectoryRecord> expert_split(const FlockingConfig& config, Split split,
                                           std::size_t count, std::uint64_t seed) {
  std::vector<TrajectoryRecord> out(count);
  parallel_for(count, [&](std::size_t i) {
    auto rng = trajectory_rng(seed, split, i);
    const SwarmState start = sample_initial_state(config, rng);
    ExpertSource expert(config.potential_cutoff);
    out[i] = rollout(expert, start, config).trajectory;
  });
  return out;
}

}  // namespace

Dataset generate_dataset(const FlockingConfig& config, std::size_t n_train,
                         std::size_t n_valid, std::size_t n_test,
                         std::uint64_t seed) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.config.seed = seed;
  ds.train = expert_split(config, Split::Train, n_train, seed);
  ds.valid = expert_split(config, Split::Valid, n_valid, seed);
  ds.test = expert_split(config, Split::Test, n_test, seed);
  return ds;
}

std::vector<SwarmState> sample_test_states(const FlockingConfig& config,
                                           std::size_t count, std::uint64_t seed) {
  std::vector<SwarmState> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = trajectory_rng(seed, Split::Test, i);
    out.push_back(sample_initial_state(config, rng));
  }
  return out;
}

}  // namespace flock
