#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "flock/controllers.hpp"
#include "flock/flocking.hpp"
#include "flock/training.hpp"

namespace flock {

enum class ExperimentKind { Sweep, VelocityRobustness, RadiusRobustness, Transfer };

std::string_view to_string(ExperimentKind kind);

struct Hyperparams {
  std::size_t features = 32;
  std::size_t taps = 3;
};

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Sweep;
  std::vector<Arch> archs{Arch::GC, Arch::GCNN, Arch::GRNN};
  std::vector<std::size_t> features_grid{16, 32, 64};
  std::vector<std::size_t> taps_grid{2, 3, 4};
  /// Velocity range, radius or team size, depending on `kind`.
  std::vector<double> grid;
  /// (G, K) used by robustness and transfer runs.
  std::map<Arch, Hyperparams> best{{Arch::GC, {32, 4}},
                                   {Arch::GCNN, {64, 3}},
                                   {Arch::GRNN, {64, 3}}};
  std::size_t realizations = 5;
  std::size_t n_train = 400;
  std::size_t n_valid = 20;
  std::size_t n_test = 20;
  std::uint64_t seed = 0;
  FlockingConfig flocking;
  TrainConfig training;

  /// Seed shared by the dataset, initialization and shuffling of one realization.
  std::uint64_t realization_seed(std::size_t r) const { return seed + r; }
  void validate() const;
};

/// One grid cell (an architecture at one hyperparameter / condition value),
/// with one entry per realization.
struct CostCell {
  Arch arch = Arch::GC;
  std::size_t features = 0;
  std::size_t taps = 0;
  std::size_t agents = 0;
  double grid_value = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> costs;         // mean closed-loop cost per realization
  std::vector<double> expert_costs;  // expert on the same initial states
  double mean = 0.0;                 // of `costs` (or of relative costs)
  double stddev = 0.0;               // population std over realizations
  bool relative = false;             // mean/stddev are of cost / expert cost
  bool best = false;

  void summarize();
};

struct CostReport {
  ExperimentKind kind = ExperimentKind::Sweep;
  std::vector<CostCell> cells;

  const CostCell& best_cell(Arch arch) const;
};

/// Trained parameters for each architecture, one set per realization.
using TrainedModels = std::vector<std::map<Arch, ControllerParams>>;

/// Mean closed-loop total cost of a controller over the given initial states.
double evaluate_controller(const ControllerParams& params,
                           const std::vector<SwarmState>& starts,
                           const FlockingConfig& config);
double evaluate_expert(const std::vector<SwarmState>& starts, const FlockingConfig& config);

std::vector<SwarmState> initial_states(const std::vector<TrajectoryRecord>& trajectories,
                                       double sampling_time);

/// Full (G, K) grid per architecture: train on a fresh dataset per
/// realization, evaluate on its test split, mark the best cell.
CostReport run_sweep(const ExperimentSpec& spec);

/// Trains each architecture at its `spec.best` hyperparameters, once per
/// realization, at the base flocking condition.
TrainedModels train_best_models(const ExperimentSpec& spec);

/// Zero-shot closed-loop cost relative to the expert, sweeping the initial
/// velocity range or the communication radius.
CostReport run_robustness(const ExperimentSpec& spec, const TrainedModels& models);

/// Zero-shot closed-loop cost on teams of different sizes.
CostReport run_transfer(const ExperimentSpec& spec, const TrainedModels& models);

/// One row per cell per realization:
/// experiment,arch,G,K,N,grid_value,realization,seed,cost,expert_cost,relative_cost
void write_csv(std::ostream& out, const CostReport& report);

/// Mean (std) table; G rows by K columns for sweeps.
void write_table(std::ostream& out, const CostReport& report);

/// Line chart of cell means against the grid value, one series per arch.
void write_svg(std::ostream& out, const CostReport& report, const std::string& title);

}  // namespace flock
