#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "flock/controllers.hpp"
#include "flock/graph.hpp"

namespace flock {

/// Environment constants. Defaults are the training condition.
struct FlockingConfig {
  std::size_t n_agents = 50;
  double sampling_time = 0.01;     // s
  double duration = 2.0;           // s
  double comm_radius = 2.0;        // m
  double max_accel = 10.0;         // m/s^2, per component
  double vel_range = 3.0;          // m/s, per-agent velocity half-width
  double bias_range = 3.0;         // m/s, shared bias half-width
  double min_init_dist = 0.1;      // m
  double potential_cutoff = 1.0;   // m
  double placement_spacing = 0.6;  // m, disc radius = spacing * sqrt(N)
  std::uint64_t seed = 0;

  std::size_t steps() const;
  /// Throws ConfigError when a constant is out of range.
  void validate() const;
};

/// Positions and velocities are N x 2; rows are agents.
struct SwarmState {
  Matrix positions;
  Matrix velocities;
  std::size_t time_index = 0;
  double sampling_time = 0.01;

  std::size_t agents() const { return static_cast<std::size_t>(positions.rows()); }
};

/// One simulated trajectory plus its per-step cost trace.
struct TrajectoryRecord {
  std::vector<Matrix> positions;   // T x (N x 2)
  std::vector<Matrix> velocities;  // T x (N x 2)
  std::vector<Matrix> features;    // T x (N x 6)
  std::vector<Matrix> actions;     // T x (N x 2), as executed (clipped)
  std::vector<GraphSnapshot> graphs;

  std::size_t length() const { return positions.size(); }
  std::size_t agents() const {
    return positions.empty() ? 0 : static_cast<std::size_t>(positions[0].rows());
  }
  GraphSequence graph_sequence() const { return GraphSequence(graphs); }
};

struct RolloutCost {
  std::vector<double> per_step;  // cost of V(t) for t = 0..T-1
  double total = 0.0;
};

struct RolloutResult {
  TrajectoryRecord trajectory;
  RolloutCost cost;
};

/// Clips each action component to [-max_accel, max_accel] and integrates one
/// sampling interval with the acceleration held constant.
SwarmState step_dynamics(const SwarmState& state, const Matrix& actions,
                         double max_accel);

Matrix clip_actions(const Matrix& actions, double max_accel);

/// Binary symmetric proximity graph: i and j linked iff |r_i - r_j| <= R.
GraphSnapshot build_comm_graph(const Matrix& positions, double radius);

/// Velocity spread around the team mean: (1/N) sum_i |v_i - mean(v)|^2.
double cost(const Matrix& velocities);

/// Collision-avoidance potential for a pair, constant beyond the cutoff.
double collision_potential(const Eigen::Vector2d& r_i, const Eigen::Vector2d& r_j,
                           double cutoff);

/// Gradient of `collision_potential` with respect to r_i.
Eigen::Vector2d potential_gradient(const Eigen::Vector2d& r_i,
                                   const Eigen::Vector2d& r_j, double cutoff);

/// Centralized expert acceleration using the full team state (unclipped).
Matrix expert_action(const SwarmState& state, double cutoff);

/// Local agent features: neighbor velocity differences and the two inverse
/// power position sums, stacked as an N x 6 matrix.
Matrix local_features(const SwarmState& state, const GraphSnapshot& graph);

/// Uniform placement in a disc with minimum spacing and a connected graph,
/// plus random velocities with a shared bias.
SwarmState sample_initial_state(const FlockingConfig& config, std::mt19937_64& rng);

/// Decides the action at each step of a closed loop.
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual Matrix act(const SwarmState& state, const GraphSnapshot& graph,
                     const Matrix& features) = 0;
};

/// The centralized expert; ignores the graph.
class ExpertSource final : public ActionSource {
 public:
  explicit ExpertSource(double cutoff) : cutoff_(cutoff) {}
  Matrix act(const SwarmState& state, const GraphSnapshot&, const Matrix&) override {
    return expert_action(state, cutoff_);
  }

 private:
  double cutoff_;
};

/// A learned controller; sees only features and graphs.
class PolicySource final : public ActionSource {
 public:
  PolicySource(const ControllerParams& params, std::size_t agents)
      : policy_(params, agents) {}
  Matrix act(const SwarmState&, const GraphSnapshot& graph,
             const Matrix& features) override {
    return policy_.step(graph, features);
  }

 private:
  Policy policy_;
};

/// Always zero acceleration.
class ZeroSource final : public ActionSource {
 public:
  Matrix act(const SwarmState& state, const GraphSnapshot&, const Matrix&) override {
    return Matrix::Zero(state.positions.rows(), kActionDim);
  }
};

/// Closed loop for config.steps() steps: graph, features, action, clip, step.
RolloutResult rollout(ActionSource& controller, const SwarmState& initial,
                      const FlockingConfig& config);

enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

/// Per-trajectory random stream, disjoint across splits and indices.
std::mt19937_64 trajectory_rng(std::uint64_t seed, Split split, std::size_t index);

struct Dataset {
  FlockingConfig config;
  std::vector<TrajectoryRecord> train;
  std::vector<TrajectoryRecord> valid;
  std::vector<TrajectoryRecord> test;

  std::size_t agents() const { return config.n_agents; }
  std::size_t steps() const { return config.steps(); }
};

/// Expert rollouts for each split, deterministic in `seed`.
Dataset generate_dataset(const FlockingConfig& config, std::size_t n_train,
                         std::size_t n_valid, std::size_t n_test,
                         std::uint64_t seed);

/// Fresh initial states for evaluation, drawn from the test stream.
std::vector<SwarmState> sample_test_states(const FlockingConfig& config,
                                           std::size_t count, std::uint64_t seed);

}  // namespace flock
