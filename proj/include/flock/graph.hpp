#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace flock {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Directed link: `target` hears `source`, i.e. S[target][source] = weight.
struct Edge {
  std::uint32_t source = 0;
  std::uint32_t target = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Graph shift operator for a single time step.
///
/// Edges are kept sorted by (target, source); weights are parallel to the
/// edge list. The row-major sparse matrix is built once at construction so
/// shifting a signal costs one pass over the edges.
class GraphSnapshot {
 public:
  GraphSnapshot() = default;
  explicit GraphSnapshot(std::size_t n_agents);
  GraphSnapshot(std::size_t n_agents, std::vector<Edge> edges,
                std::vector<double> weights = {});

  std::size_t size() const { return n_agents_; }
  std::size_t edge_count() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const double> weights() const { return weights_; }

  /// Agents that `agent` hears from, in increasing order.
  std::vector<std::size_t> neighbors(std::size_t agent) const;

  bool is_symmetric() const;
  bool is_connected() const;

  const SparseMatrix& matrix() const { return matrix_; }
  Matrix dense() const;

  /// Relabels node i as perm[i]; the result is P S P^T.
  GraphSnapshot permuted(std::span<const std::size_t> perm) const;

  friend bool operator==(const GraphSnapshot& a, const GraphSnapshot& b) {
    return a.n_agents_ == b.n_agents_ && a.edges_ == b.edges_ &&
           a.weights_ == b.weights_;
  }

 private:
  std::size_t n_agents_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  SparseMatrix matrix_;
};

/// Snapshots S(0), ..., S(T-1) over a fixed agent set.
class GraphSequence {
 public:
  GraphSequence() = default;
  explicit GraphSequence(std::vector<GraphSnapshot> snapshots);

  std::size_t length() const { return snapshots_.size(); }
  std::size_t agents() const {
    return snapshots_.empty() ? 0 : snapshots_.front().size();
  }
  const GraphSnapshot& operator[](std::size_t t) const { return snapshots_[t]; }
  std::span<const GraphSnapshot> snapshots() const { return snapshots_; }

 private:
  std::vector<GraphSnapshot> snapshots_;
};

/// S * signal, touching only neighbor rows.
Matrix shift(const GraphSnapshot& graph, const Matrix& signal);

/// S^T * signal; the adjoint of `shift`, used by reverse mode.
Matrix shift_adjoint(const GraphSnapshot& graph, const Matrix& signal);

/// Delayed aggregates Y(0..K-1) at one time step.
///
/// Y(0)(t) = X(t) and Y(k)(t) = S(t) Y(k-1)(t-1), zero before the first
/// observation. Advancing costs one shift per tap, which is one exchange
/// with immediate neighbors per sampling interval.
class AggregationBuffer {
 public:
  AggregationBuffer() = default;
  AggregationBuffer(std::size_t taps, Eigen::Index agents, Eigen::Index features);

  std::size_t taps() const { return taps_.size(); }
  Eigen::Index agents() const { return agents_; }
  Eigen::Index features() const { return features_; }
  const Matrix& tap(std::size_t k) const { return taps_[k]; }
  std::span<const Matrix> all_taps() const { return taps_; }

  /// In-place form of `advance_buffer`.
  void advance(const GraphSnapshot& graph, const Matrix& new_signal);

 private:
  Eigen::Index agents_ = 0;
  Eigen::Index features_ = 0;
  std::vector<Matrix> taps_;
};

AggregationBuffer advance_buffer(const AggregationBuffer& buffer,
                                 const GraphSnapshot& graph,
                                 const Matrix& new_signal);

using SpaceTimeSet = std::set<std::pair<std::size_t, std::size_t>>;

/// (agent, time) pairs whose features can reach `agent` at time `t` through
/// K delayed taps. The k-th level holds agents reachable by k hops taken
/// over S(t), S(t-1), ..., S(t-k+1), stamped at time t-k.
SpaceTimeSet delayed_k_hop_cone(const GraphSequence& seq, std::size_t agent,
                                std::size_t t, std::size_t taps);

}  // namespace flock
