#pragma once

#include <random>
#include <vector>

#include "flock/graph.hpp"

namespace flock::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

/// Symmetric binary Erdos-Renyi graph.
inline GraphSnapshot random_graph(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution link(p);
  std::vector<Edge> edges;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (link(rng)) {
        edges.push_back({i, j});
        edges.push_back({j, i});
      }
  return GraphSnapshot(n, std::move(edges));
}

inline GraphSequence random_sequence(std::size_t n, std::size_t t, double p,
                                     std::mt19937_64& rng) {
  std::vector<GraphSnapshot> g;
  for (std::size_t i = 0; i < t; ++i) g.push_back(random_graph(n, p, rng));
  return GraphSequence(std::move(g));
}

inline std::vector<Matrix> random_signals(std::size_t t, Eigen::Index n, Eigen::Index f,
                                          std::mt19937_64& rng) {
  std::vector<Matrix> x;
  for (std::size_t i = 0; i < t; ++i) x.push_back(random_matrix(n, f, rng));
  return x;
}

/// S(t) S(t-1) ... S(t-k+1) x(t-k) from dense products; zero before time 0.
inline Matrix unrolled_tap(const GraphSequence& seq, const std::vector<Matrix>& x,
                           std::size_t t, std::size_t k) {
  if (k > t) return Matrix::Zero(x[0].rows(), x[0].cols());
  Matrix prod = Matrix::Identity(static_cast<Eigen::Index>(seq.agents()),
                                 static_cast<Eigen::Index>(seq.agents()));
  for (std::size_t j = 0; j < k; ++j) prod = prod * seq[t - j].dense();
  return prod * x[t - k];
}

inline Matrix permutation_matrix(const std::vector<std::size_t>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < perm.size(); ++i)
    p(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(i)) = 1.0;
  return p;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace flock::testing
