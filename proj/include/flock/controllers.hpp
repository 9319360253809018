#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "flock/graph.hpp"

namespace flock {

inline constexpr Eigen::Index kFeatureDim = 6;
inline constexpr Eigen::Index kActionDim = 2;

enum class Arch : std::uint8_t { GC = 0, GCNN = 1, GRNN = 2 };

std::string_view to_string(Arch arch);
Arch parse_arch(std::string_view name);

/// K coefficient matrices of shape F_in x F_out, one per delayed tap.
struct FilterBank {
  std::vector<Matrix> taps;

  static FilterBank zeros(std::size_t taps, Eigen::Index in, Eigen::Index out);

  std::size_t size() const { return taps.size(); }
  Eigen::Index in_features() const { return taps.empty() ? 0 : taps[0].rows(); }
  Eigen::Index out_features() const { return taps.empty() ? 0 : taps[0].cols(); }

  friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

/// Learnable coefficients of one controller. Also used to hold gradients.
///
/// GC and GCNN carry only the input bank; GRNN adds the hidden-to-hidden
/// and hidden-to-output banks. The readout is an affine map G -> 2 shared by
/// every agent, so the same parameters run on teams of any size.
///
/// `tap_gain` g is a fixed reparametrization: the coefficient applied to
/// tap k is g^k times the stored matrix. With a binary adjacency the k-th
/// aggregate grows like degree^k, and g ~ 1/degree keeps every tap on the
/// same scale for the optimizer. g = 1 is the plain parametrization. The
/// set of representable controllers does not depend on g.
struct ControllerParams {
  Arch arch = Arch::GC;
  double tap_gain = 1.0;
  FilterBank input;
  std::optional<FilterBank> hidden;
  std::optional<FilterBank> output;
  Matrix readout_weight;  // G x 2
  Matrix readout_bias;    // 1 x 2

  std::size_t taps() const { return input.size(); }
  Eigen::Index features() const { return readout_weight.rows(); }
  Eigen::Index hidden_features() const {
    return arch == Arch::GRNN ? input.out_features() : 0;
  }

  /// Throws InvalidArgument unless shapes agree with `arch`.
  void validate() const;

  ControllerParams zeros_like() const;
  std::size_t parameter_count() const;

  /// Every tensor in a fixed order: input taps, hidden taps, output taps,
  /// readout weight, readout bias.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  friend bool operator==(const ControllerParams&, const ControllerParams&) = default;
};

/// Fan-in scaled uniform initialization of the stored matrices,
/// deterministic in `seed`.
ControllerParams init_params(Arch arch, std::size_t features, std::size_t taps,
                             std::uint64_t seed, double tap_gain = 1.0);

/// The same controller with tap_gain folded into the coefficients
/// (tap_gain = 1 in the result).
ControllerParams effective_coefficients(const ControllerParams& params);

/// Sum over k of Y(k) * A(k).
Matrix graph_conv(const FilterBank& bank, const AggregationBuffer& buffer);

/// Values saved at one step for reverse mode.
struct TapeStep {
  GraphSnapshot graph;
  std::vector<Matrix> input_taps;
  std::vector<Matrix> hidden_taps;  // GRNN only
  std::vector<Matrix> output_taps;  // GRNN only
  Matrix hidden;                    // Z(t), GRNN only
  Matrix activation;                // input to the readout
};

struct ForwardTape {
  Arch arch = Arch::GC;
  std::size_t taps = 0;
  Eigen::Index features = 0;
  Eigen::Index agents = 0;
  std::vector<TapeStep> steps;

  std::size_t length() const { return steps.size(); }
};

/// A controller running online: one call per sampling interval, using only
/// the current graph, the current local features and its own buffers.
class Policy {
 public:
  Policy(const ControllerParams& params, std::size_t agents);

  /// Actions for time step t. Records into `tape` when given.
  Matrix step(const GraphSnapshot& graph, const Matrix& features,
              ForwardTape* tape = nullptr);

  std::size_t agents() const { return static_cast<std::size_t>(agents_); }

 private:
  ControllerParams params_;  // effective coefficients
  Eigen::Index agents_;
  AggregationBuffer input_buffer_;
  AggregationBuffer hidden_buffer_;
  AggregationBuffer output_buffer_;
  Matrix previous_hidden_;
};

struct ForwardResult {
  std::vector<Matrix> actions;  // T matrices of shape N x 2
  ForwardTape tape;
};

/// Runs the controller over a recorded sequence of graphs and features.
ForwardResult forward(const ControllerParams& params, const GraphSequence& graphs,
                      std::span<const Matrix> features);

ForwardResult forward_gc(const ControllerParams& params, const GraphSequence& graphs,
                         std::span<const Matrix> features);
ForwardResult forward_gcnn(const ControllerParams& params,
                           const GraphSequence& graphs,
                           std::span<const Matrix> features);
ForwardResult forward_grnn(const ControllerParams& params,
                           const GraphSequence& graphs,
                           std::span<const Matrix> features);

/// Reverse-mode gradient of a scalar loss with respect to every parameter,
/// given dLoss/dU(t) for each recorded step. Graphs are constants.
ControllerParams backward(const ControllerParams& params, const ForwardTape& tape,
                          std::span<const Matrix> action_grads);

}  // namespace flock
