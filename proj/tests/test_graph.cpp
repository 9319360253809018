#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flock/errors.hpp"
#include "flock/graph.hpp"
#include "support.hpp"

using namespace flock;
using namespace flock::testing;

TEST_SUITE("graph") {
  TEST_CASE("snapshot validates edges") {
    CHECK_THROWS_AS(GraphSnapshot(3, {{0, 0}}), InvalidArgument);
    CHECK_THROWS_AS(GraphSnapshot(3, {{0, 3}}), InvalidArgument);
    CHECK_THROWS_AS(GraphSnapshot(3, {{0, 1}, {0, 1}}), InvalidArgument);
    CHECK_THROWS_AS(GraphSnapshot(3, {{0, 1}}, {-1.0}), InvalidArgument);
    CHECK_THROWS_AS(GraphSnapshot(0), InvalidArgument);
    const GraphSnapshot g(3, {{0, 1}, {1, 0}, {1, 2}});
    CHECK_FALSE(g.is_symmetric());
    CHECK(g.dense()(1, 0) == 1.0);  // edge (source 0 -> target 1) lands in row 1
    CHECK(g.dense()(0, 1) == 1.0);
    CHECK(g.dense()(2, 1) == 1.0);
    CHECK(g.dense()(1, 2) == 0.0);
  }

  TEST_CASE("connectivity") {
    CHECK(GraphSnapshot(1).is_connected());
    CHECK_FALSE(GraphSnapshot(2).is_connected());
    CHECK(GraphSnapshot(3, {{0, 1}, {1, 0}, {1, 2}, {2, 1}}).is_connected());
    CHECK_FALSE(GraphSnapshot(4, {{0, 1}, {1, 0}, {2, 3}, {3, 2}}).is_connected());
  }

  TEST_CASE("shift swaps a two-node graph") {
    const GraphSnapshot g(2, {{0, 1}, {1, 0}});
    Matrix x(2, 1);
    x << 1, 2;
    Matrix expected(2, 1);
    expected << 2, 1;
    CHECK(shift(g, x) == expected);
  }

  TEST_CASE("shift on an empty graph is zero") {
    std::mt19937_64 rng(1);
    const Matrix x = random_matrix(4, 3, rng);
    CHECK(shift(GraphSnapshot(4), x).isZero(0.0));
  }

  TEST_CASE("shift matches the dense product") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const GraphSnapshot g = random_graph(6, 0.4, rng);
      const Matrix x = random_matrix(6, 3, rng);
      CHECK(rel_diff(shift(g, x), g.dense() * x) <= 1e-15);
      CHECK(rel_diff(shift_adjoint(g, x), g.dense().transpose() * x) <= 1e-15);
    }
  }

  TEST_CASE("shift rejects a row mismatch") {
    CHECK_THROWS_AS(shift(GraphSnapshot(3), Matrix::Zero(4, 1)), InvalidArgument);
  }

  TEST_CASE("shift commutes with permutations") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 7;
      const GraphSnapshot g = random_graph(n, 0.5, rng);
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      const Matrix p = permutation_matrix(perm);
      const Matrix x = random_matrix(static_cast<Eigen::Index>(n), 2, rng);
      CHECK(g.permuted(perm).dense() == p * g.dense() * p.transpose());
      // Neighbor sums are accumulated in index order, which the permutation
      // changes, so agreement is up to rounding.
      CHECK(rel_diff(shift(g.permuted(perm), p * x), p * shift(g, x)) <= 1e-15);
    }
  }

  TEST_CASE("sequence requires constant size") {
    CHECK_THROWS_AS(GraphSequence(std::vector<GraphSnapshot>{}), InvalidArgument);
    CHECK_THROWS_AS(GraphSequence({GraphSnapshot(2), GraphSnapshot(3)}), InvalidArgument);
    CHECK(GraphSequence({GraphSnapshot(2), GraphSnapshot(2)}).length() == 2);
  }

  TEST_CASE("fresh buffer holds the signal in tap 0 only") {
    std::mt19937_64 rng(4);
    const Matrix x = random_matrix(3, 2, rng);
    const GraphSnapshot g = random_graph(3, 1.0, rng);
    const AggregationBuffer b = advance_buffer(AggregationBuffer(4, 3, 2), g, x);
    CHECK(b.tap(0) == x);
    for (std::size_t k = 1; k < 4; ++k) CHECK(b.tap(k).isZero(0.0));
  }

  TEST_CASE("two advances with constant S and X give S X in tap 1") {
    std::mt19937_64 rng(5);
    const Matrix x = random_matrix(5, 2, rng);
    const GraphSnapshot g = random_graph(5, 0.6, rng);
    AggregationBuffer b(3, 5, 2);
    b.advance(g, x);
    b.advance(g, x);
    CHECK(b.tap(1) == g.matrix() * x);
    CHECK(b.tap(2).isZero(0.0));
  }

  TEST_CASE("buffer taps equal unrolled shift products") {
    std::mt19937_64 rng(6);
    const std::size_t n = 6, steps = 4, taps = 3;
    const GraphSequence seq = random_sequence(n, steps, 0.5, rng);
    const auto x = random_signals(steps, n, 2, rng);
    AggregationBuffer b(taps, n, 2);
    for (std::size_t t = 0; t < steps; ++t) {
      b.advance(seq[t], x[t]);
      for (std::size_t k = 0; k < taps; ++k)
        CHECK(rel_diff(b.tap(k), unrolled_tap(seq, x, t, k)) <= 1e-12);
    }
  }

  TEST_CASE("buffer rejects mismatched signals") {
    AggregationBuffer b(2, 3, 2);
    CHECK_THROWS_AS(b.advance(GraphSnapshot(3), Matrix::Zero(3, 1)), InvalidArgument);
    CHECK_THROWS_AS(b.advance(GraphSnapshot(4), Matrix::Zero(3, 2)), InvalidArgument);
  }

  TEST_CASE("cone with one tap is the agent itself") {
    std::mt19937_64 rng(7);
    const GraphSequence seq = random_sequence(5, 4, 0.5, rng);
    CHECK(delayed_k_hop_cone(seq, 2, 3, 1) == SpaceTimeSet{{2, 3}});
  }

  TEST_CASE("cone on a static complete graph reaches everyone one step back") {
    std::vector<Edge> edges;
    for (std::uint32_t i = 0; i < 4; ++i)
      for (std::uint32_t j = 0; j < 4; ++j)
        if (i != j) edges.push_back({i, j});
    const GraphSnapshot full(4, edges);
    const GraphSequence seq({full, full, full});
    const SpaceTimeSet cone = delayed_k_hop_cone(seq, 0, 2, 2);
    // Without self-loops the agent's own past value is not one hop away.
    SpaceTimeSet expected{{0, 2}, {1, 1}, {2, 1}, {3, 1}};
    CHECK(cone == expected);
    // Two hops bring the agent's own value back.
    CHECK(delayed_k_hop_cone(seq, 0, 2, 3).count({0, 0}) == 1);
  }

  // Brute force: (j, t - k) is in the cone iff some walk i = a_0, a_1, ..., a_k = j
  // has a_{m+1} a neighbor of a_m in S(t - m).
  SpaceTimeSet brute_cone(const GraphSequence& seq, std::size_t i, std::size_t t,
                          std::size_t taps) {
    SpaceTimeSet out;
    const std::size_t n = seq.agents();
    for (std::size_t k = 0; k < taps && k <= t; ++k) {
      std::vector<std::size_t> walk(k + 1, 0);
      const auto total = static_cast<std::size_t>(std::pow(n, k));
      for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        walk[0] = i;
        for (std::size_t m = 1; m <= k; ++m) {
          walk[m] = c % n;
          c /= n;
        }
        bool ok = true;
        for (std::size_t m = 0; m < k && ok; ++m)
          ok = seq[t - m].dense()(static_cast<Eigen::Index>(walk[m]),
                                  static_cast<Eigen::Index>(walk[m + 1])) != 0.0;
        if (ok) out.emplace(walk[k], t - k);
      }
    }
    return out;
  }

  TEST_CASE("cone on a path that loses an edge matches brute force") {
    const GraphSnapshot path(3, {{0, 1}, {1, 0}, {1, 2}, {2, 1}});
    const GraphSnapshot cut(3, {{0, 1}, {1, 0}});
    const GraphSequence seq({path, path, cut, path});
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t k = 1; k <= 4; ++k)
          CHECK(delayed_k_hop_cone(seq, i, t, k) == brute_cone(seq, i, t, k));
  }

  TEST_CASE("cone matches brute force on random sequences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const GraphSequence seq = random_sequence(5, 5, 0.35, rng);
      for (std::size_t i = 0; i < 5; ++i)
        CHECK(delayed_k_hop_cone(seq, i, 4, 4) == brute_cone(seq, i, 4, 4));
    }
  }
}
