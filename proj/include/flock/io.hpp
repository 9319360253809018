#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flock/controllers.hpp"
#include "flock/flocking.hpp"

namespace flock {

// Dataset container ("FLK1"), little-endian:
//   "FLK1" u32 version
//   u64 N, T, F, A (action dim), f64 Ts, f64 R, u64 seed,
//   u64 n_train, n_valid, n_test,
//   f64 max_accel, vel_range, bias_range, min_init_dist, potential_cutoff,
//       placement_spacing
//   per trajectory (train, then valid, then test):
//     f64 positions[T][N][2], velocities[T][N][2], features[T][N][F],
//         actions[T][N][A]
//     per step: u32 edge count, then (u32 source, u32 target) pairs
inline constexpr std::uint32_t kDatasetVersion = 1;

// Checkpoint ("FLKM"), little-endian:
//   "FLKM" u32 version u8 arch u64 G u64 K u64 H f64 tap_gain u64 tensor count
//   per tensor: u64 rows u64 cols f64 data[rows][cols]
//   u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

void write_checkpoint(std::ostream& out, const ControllerParams& params);
ControllerParams read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ControllerParams& params);
ControllerParams load_checkpoint(const std::filesystem::path& path);

std::vector<char> read_file_bytes(const std::filesystem::path& path);

}  // namespace flock
