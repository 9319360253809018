#include "flock/graph.hpp"

#include <algorithm>
#include <queue>
#include <string>

#include "flock/errors.hpp"

namespace flock {

GraphSnapshot::GraphSnapshot(std::size_t n_agents)
    : GraphSnapshot(n_agents, {}, {}) {}

GraphSnapshot::GraphSnapshot(std::size_t n_agents, std::vector<Edge> edges,
                             std::vector<double> weights)
    : n_agents_(n_agents) {
  if (n_agents == 0) throw InvalidArgument("graph needs at least one agent");
  if (weights.empty()) weights.assign(edges.size(), 1.0);
  if (weights.size() != edges.size())
    throw InvalidArgument("edge and weight counts differ");

  std::vector<std::size_t> order(edges.size());
  for (std::size_t e = 0; e < order.size(); ++e) order[e] = e;
  auto key = [&](std::size_t e) {
    return std::pair{edges[e].target, edges[e].source};
  };
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  edges_.reserve(edges.size());
  weights_.reserve(edges.size());
  for (std::size_t e : order) {
    const Edge& edge = edges[e];
    if (edge.source >= n_agents || edge.target >= n_agents)
      throw InvalidArgument("edge endpoint out of range");
    if (edge.source == edge.target) throw InvalidArgument("self-loop in graph");
    if (!(weights[e] > 0.0)) throw InvalidArgument("edge weight must be positive");
    if (!edges_.empty() && edges_.back() == edge)
      throw InvalidArgument("duplicate edge");
    edges_.push_back(edge);
    weights_.push_back(weights[e]);
  }

  matrix_.resize(static_cast<Eigen::Index>(n_agents),
                 static_cast<Eigen::Index>(n_agents));
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e)
    triplets.emplace_back(edges_[e].target, edges_[e].source, weights_[e]);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
}

std::vector<std::size_t> GraphSnapshot::neighbors(std::size_t agent) const {
  if (agent >= n_agents_) throw InvalidArgument("agent out of range");
  std::vector<std::size_t> out;
  for (SparseMatrix::InnerIterator it(matrix_, static_cast<Eigen::Index>(agent));
       it; ++it)
    out.push_back(static_cast<std::size_t>(it.col()));
  return out;
}

bool GraphSnapshot::is_symmetric() const {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge mirror{edges_[e].target, edges_[e].source};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), mirror,
                               [](const Edge& a, const Edge& b) {
                                 return std::pair{a.target, a.source} <
                                        std::pair{b.target, b.source};
                               });
    if (it == edges_.end() || *it != mirror) return false;
    if (weights_[static_cast<std::size_t>(it - edges_.begin())] != weights_[e])
      return false;
  }
  return true;
}

bool GraphSnapshot::is_connected() const {
  // Treats links as undirected.
  std::vector<std::vector<std::size_t>> adj(n_agents_);
  for (const Edge& e : edges_) {
    adj[e.source].push_back(e.target);
    adj[e.target].push_back(e.source);
  }
  std::vector<char> seen(n_agents_, 0);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t visited = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        frontier.push(v);
      }
    }
  }
  return visited == n_agents_;
}

Matrix GraphSnapshot::dense() const { return Matrix(matrix_); }

GraphSnapshot GraphSnapshot::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != n_agents_) throw InvalidArgument("permutation size mismatch");
  std::vector<Edge> edges;
  edges.reserve(edges_.size());
  for (const Edge& e : edges_)
    edges.push_back({static_cast<std::uint32_t>(perm[e.source]),
                     static_cast<std::uint32_t>(perm[e.target])});
  return GraphSnapshot(n_agents_, std::move(edges), weights_);
}

GraphSequence::GraphSequence(std::vector<GraphSnapshot> snapshots)
    : snapshots_(std::move(snapshots)) {
  if (snapshots_.empty()) throw InvalidArgument("graph sequence is empty");
  for (const auto& s : snapshots_)
    if (s.size() != snapshots_.front().size())
      throw InvalidArgument("agent count changes within graph sequence");
}

Matrix shift(const GraphSnapshot& graph, const Matrix& signal) {
  if (static_cast<std::size_t>(signal.rows()) != graph.size())
    throw InvalidArgument("shift: signal has " + std::to_string(signal.rows()) +
                          " rows, graph has " + std::to_string(graph.size()) +
                          " agents");
  return graph.matrix() * signal;
}

Matrix shift_adjoint(const GraphSnapshot& graph, const Matrix& signal) {
  if (static_cast<std::size_t>(signal.rows()) != graph.size())
    throw InvalidArgument("shift_adjoint: row count mismatch");
  return graph.matrix().transpose() * signal;
}

AggregationBuffer::AggregationBuffer(std::size_t taps, Eigen::Index agents,
                                     Eigen::Index features)
    : agents_(agents), features_(features) {
  if (taps == 0) throw InvalidArgument("buffer needs at least one tap");
  taps_.assign(taps, Matrix::Zero(agents, features));
}

void AggregationBuffer::advance(const GraphSnapshot& graph,
                                const Matrix& new_signal) {
  if (new_signal.rows() != agents_ || new_signal.cols() != features_ ||
      static_cast<std::size_t>(agents_) != graph.size())
    throw InvalidArgument("advance_buffer: dimension mismatch");
  for (std::size_t k = taps_.size() - 1; k >= 1; --k)
    taps_[k] = graph.matrix() * taps_[k - 1];
  taps_[0] = new_signal;
}

AggregationBuffer advance_buffer(const AggregationBuffer& buffer,
                                 const GraphSnapshot& graph,
                                 const Matrix& new_signal) {
  AggregationBuffer next = buffer;
  next.advance(graph, new_signal);
  return next;
}

SpaceTimeSet delayed_k_hop_cone(const GraphSequence& seq, std::size_t agent,
                                std::size_t t, std::size_t taps) {
  if (t >= seq.length()) throw InvalidArgument("cone: time out of range");
  if (agent >= seq.agents()) throw InvalidArgument("cone: agent out of range");
  if (taps == 0) throw InvalidArgument("cone: need at least one tap");

  SpaceTimeSet cone{{agent, t}};
  std::set<std::size_t> level{agent};
  for (std::size_t k = 1; k < taps && k <= t; ++k) {
    const GraphSnapshot& hop = seq[t - k + 1];
    std::set<std::size_t> next;
    for (std::size_t j : level)
      for (std::size_t nb : hop.neighbors(j)) next.insert(nb);
    for (std::size_t j : next) cone.emplace(j, t - k);
    level = std::move(next);
  }
  return cone;
}

}  // namespace flock
