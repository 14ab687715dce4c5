#pragma once

// Graphs, orders, and the small structural utilities everything else leans
// on.  Weighted graphs are plain Eigen matrices with the convention that
// W(i, j) is the weight of edge i -> j, so row i holds node i's outgoing
// edges and column j holds node j's incoming ones.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "toposwap/errors.hpp"
#include "toposwap/rng.hpp"

namespace toposwap {

using Matrix = Eigen::MatrixXd;
using IntMatrix = Eigen::MatrixXi;
using Vector = Eigen::VectorXd;

// A topological order over nodes 0..d-1.  order()[p] is the node placed at
// position p.  Construction validates that the contents are a bijection.
class Permutation {
 public:
  explicit Permutation(std::vector<int> order) : order_(std::move(order)) {
    const int d = static_cast<int>(order_.size());
    std::vector<char> seen(static_cast<std::size_t>(d), 0);
    for (int node : order_) {
      if (node < 0 || node >= d || seen[static_cast<std::size_t>(node)])
        throw ConfigError("permutation is not a bijection over 0..d-1");
      seen[static_cast<std::size_t>(node)] = 1;
    }
    positions_.resize(order_.size());
    for (int p = 0; p < d; ++p)
      positions_[static_cast<std::size_t>(order_[static_cast<std::size_t>(p)])] = p;
  }

  static Permutation identity(int d) {
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
    return Permutation(std::move(order));
  }

  static Permutation random(int d, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    return Permutation(std::move(order));
  }

  int size() const { return static_cast<int>(order_.size()); }
  int node_at(int position) const { return order_[static_cast<std::size_t>(position)]; }
  int position_of(int node) const { return positions_[static_cast<std::size_t>(node)]; }
  const std::vector<int>& order() const { return order_; }

  // True when node i is placed before node j.
  bool before(int i, int j) const { return position_of(i) < position_of(j); }

  bool operator==(const Permutation& other) const { return order_ == other.order_; }

 private:
  std::vector<int> order_;
  std::vector<int> positions_;
};

// Exchanges the positions of nodes i and j; an involution.
inline Permutation swap_nodes(const Permutation& pi, int i, int j) {
  std::vector<int> order = pi.order();
  std::swap(order[static_cast<std::size_t>(pi.position_of(i))],
            order[static_cast<std::size_t>(pi.position_of(j))]);
  return Permutation(std::move(order));
}

// Kahn's algorithm with a deterministic tie-break: among current sources the
// lowest-indexed node is emitted first.  Entries with |w| <= zero_tol are
// treated as absent.  Throws CyclicGraphError when no full order exists.
inline Permutation topological_sort(const Matrix& w, double zero_tol = 0.0) {
  const int d = static_cast<int>(w.rows());
  if (w.cols() != d) throw DimensionMismatchError("topological_sort: matrix must be square");

  std::vector<int> in_degree(static_cast<std::size_t>(d), 0);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (std::abs(w(i, j)) > zero_tol) ++in_degree[static_cast<std::size_t>(j)];

  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(d));
  std::vector<char> placed(static_cast<std::size_t>(d), 0);
  for (int step = 0; step < d; ++step) {
    int source = -1;
    for (int v = 0; v < d; ++v) {
      if (!placed[static_cast<std::size_t>(v)] && in_degree[static_cast<std::size_t>(v)] == 0) {
        source = v;
        break;
      }
    }
    if (source < 0) throw CyclicGraphError("topological_sort: graph contains a directed cycle");
    placed[static_cast<std::size_t>(source)] = 1;
    order.push_back(source);
    for (int j = 0; j < d; ++j)
      if (std::abs(w(source, j)) > zero_tol) --in_degree[static_cast<std::size_t>(j)];
  }
  return Permutation(std::move(order));
}

// Does every entry of w above zero_tol point forward under pi?
inline bool is_consistent(const Matrix& w, const Permutation& pi, double zero_tol = 0.0) {
  const int d = static_cast<int>(w.rows());
  if (w.cols() != d || pi.size() != d)
    throw DimensionMismatchError("is_consistent: matrix/permutation size mismatch");
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (std::abs(w(i, j)) > zero_tol && !pi.before(i, j)) return false;
  return true;
}

// Binary adjacency of entries strictly larger than omega in magnitude.
inline IntMatrix threshold(const Matrix& w, double omega) {
  IntMatrix b(w.rows(), w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) b(i, j) = std::abs(w(i, j)) > omega ? 1 : 0;
  return b;
}

// Structural Hamming distance between two binary adjacencies.  Per unordered
// pair, a missing or extra edge costs 1 each and a reversal costs 1.
inline int shd(const IntMatrix& estimate, const IntMatrix& truth) {
  const int d = static_cast<int>(estimate.rows());
  if (estimate.cols() != d || truth.rows() != d || truth.cols() != d)
    throw DimensionMismatchError("shd: adjacency shapes differ");
  int cost = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const int e_fwd = estimate(i, j) != 0, e_bwd = estimate(j, i) != 0;
      const int t_fwd = truth(i, j) != 0, t_bwd = truth(j, i) != 0;
      if (e_fwd == t_fwd && e_bwd == t_bwd) continue;
      const bool reversal = (e_fwd != e_bwd) && (t_fwd != t_bwd);
      cost += reversal ? 1 : std::abs(e_fwd - t_fwd) + std::abs(e_bwd - t_bwd);
    }
  }
  return cost;
}

}  // namespace toposwap
