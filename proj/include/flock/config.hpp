#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "flock/controllers.hpp"
#include "flock/experiments.hpp"
#include "flock/flocking.hpp"
#include "flock/training.hpp"

namespace flock {

inline constexpr int kConfigVersion = 1;

struct RunPaths {
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir;
};

/// Everything a flockctl command can be told, read from one JSON document.
/// Keys mirror the field names below; see README for the schema.
struct RunConfig {
  std::uint64_t seed = 0;
  FlockingConfig flocking;
  TrainConfig training;

  std::size_t n_train = 400;
  std::size_t n_valid = 20;
  std::size_t n_test = 20;

  // Single-model commands (train, eval).
  Arch arch = Arch::GRNN;
  std::size_t features = 64;
  std::size_t taps = 3;

  // Experiment commands.
  std::vector<Arch> archs{Arch::GC, Arch::GCNN, Arch::GRNN};
  std::vector<std::size_t> features_grid{16, 32, 64};
  std::vector<std::size_t> taps_grid{2, 3, 4};
  std::vector<double> velocity_grid{1.5, 2.25, 3.0, 3.75, 4.5};
  std::vector<double> radius_grid{1.5, 2.0, 2.5, 3.0, 3.5};
  std::vector<double> transfer_grid{50, 62, 75, 87, 100};
  std::map<Arch, Hyperparams> best{{Arch::GC, {32, 4}},
                                   {Arch::GCNN, {64, 3}},
                                   {Arch::GRNN, {64, 3}}};
  std::size_t realizations = 5;

  RunPaths paths;

  /// Scales a run down to laptop size: 40/10/20 trajectories, 10 epochs,
  /// 3 realizations, two-trajectory batches at a larger step size.
  void apply_desk();
  ExperimentSpec experiment(ExperimentKind kind) const;
  void validate() const;
};

/// Parses a config document. Unknown keys and a missing or unsupported
/// `version` raise ConfigError; relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace flock
