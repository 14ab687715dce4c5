#pragma once

// Synthetic ground truth: random DAGs, edge weights, and draws from the
// induced structural models.  All sampling runs through Rng so one recorded
// seed pins the whole instance.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/models.hpp"
#include "toposwap/rng.hpp"

namespace toposwap {

enum class GraphKind { kErdosRenyi, kScaleFree, kFullyConnected };

inline std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::kErdosRenyi: return "er";
    case GraphKind::kScaleFree: return "sf";
    case GraphKind::kFullyConnected: return "full";
  }
  return "?";
}

inline GraphKind graph_from_string(const std::string& name) {
  if (name == "er") return GraphKind::kErdosRenyi;
  if (name == "sf") return GraphKind::kScaleFree;
  if (name == "full") return GraphKind::kFullyConnected;
  throw ConfigError("unknown graph kind: " + name);
}

struct GraphSpec {
  GraphKind kind = GraphKind::kErdosRenyi;
  int d = 0;
  int k = 1;  // expected edges per node (ER: kd edges in expectation; SF: attachment count)
};

enum class NoiseKind { kGaussEv, kGaussNv, kExp, kGumbel };

inline std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussEv: return "gauss-ev";
    case NoiseKind::kGaussNv: return "gauss-nv";
    case NoiseKind::kExp: return "exp";
    case NoiseKind::kGumbel: return "gumbel";
  }
  return "?";
}

inline NoiseKind noise_from_string(const std::string& name) {
  if (name == "gauss-ev") return NoiseKind::kGaussEv;
  if (name == "gauss-nv") return NoiseKind::kGaussNv;
  if (name == "exp") return NoiseKind::kExp;
  if (name == "gumbel") return NoiseKind::kGumbel;
  throw ConfigError("unknown noise kind: " + name);
}

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kGaussEv;
  // gauss-nv draws per-node standard deviations uniform on [sigma_min, sigma_max].
  double sigma_min = 1.0;
  double sigma_max = 2.0;
};

inline double er_edge_probability(const GraphSpec& spec) {
  if (spec.d < 2) return 0.0;
  return std::min(1.0, 2.0 * spec.k / static_cast<double>(spec.d - 1));
}

// Random DAG skeletons.
//  er:   each forward pair of a uniformly random order, independently with
//        probability 2k/(d-1), giving kd edges in expectation.
//  sf:   Barabasi-Albert preferential attachment (linear, i.e. exponent 1):
//        each arriving node links to k existing nodes, edges oriented new ->
//        old, labels then shuffled.
//  full: every forward pair of a random order.
inline IntMatrix random_dag(const GraphSpec& spec, Rng& rng) {
  if (spec.d < 1) throw ConfigError("random_dag: d must be >= 1");
  if (spec.kind != GraphKind::kFullyConnected && spec.k < 1)
    throw ConfigError("random_dag: k must be >= 1");
  const int d = spec.d;
  IntMatrix b = IntMatrix::Zero(d, d);

  if (spec.kind == GraphKind::kScaleFree) {
    if (spec.k >= d) throw ConfigError("random_dag: scale-free needs k < d");
    const int k = spec.k;
    // repeated_nodes holds one copy of a node per unit of degree, so uniform
    // draws from it realize degree-proportional attachment.
    std::vector<int> repeated;
    std::vector<std::vector<int>> links(static_cast<std::size_t>(d));
    for (int t = k; t < d; ++t) {
      std::vector<int> targets;
      if (t == k) {
        for (int v = 0; v < k; ++v) targets.push_back(v);
      } else {
        while (static_cast<int>(targets.size()) < k) {
          const int pick = repeated[static_cast<std::size_t>(rng.uniform_int(repeated.size()))];
          if (std::find(targets.begin(), targets.end(), pick) == targets.end())
            targets.push_back(pick);
        }
      }
      for (int v : targets) {
        links[static_cast<std::size_t>(t)].push_back(v);
        repeated.push_back(v);
        repeated.push_back(t);
      }
    }
    // Shuffle labels so hubs land anywhere in the order.
    std::vector<int> label(static_cast<std::size_t>(d));
    for (int v = 0; v < d; ++v) label[static_cast<std::size_t>(v)] = v;
    rng.shuffle(label);
    for (int t = 0; t < d; ++t)
      for (int v : links[static_cast<std::size_t>(t)])
        b(label[static_cast<std::size_t>(t)], label[static_cast<std::size_t>(v)]) = 1;
    return b;
  }

  const Permutation order = Permutation::random(d, rng);
  const double p = er_edge_probability(spec);
  for (int a = 0; a < d; ++a)
    for (int c = a + 1; c < d; ++c) {
      const bool present = spec.kind == GraphKind::kFullyConnected || rng.bernoulli(p);
      if (present) b(order.node_at(a), order.node_at(c)) = 1;
    }
  return b;
}

// Edge weights uniform on [-2, -0.5] u [0.5, 2]: bounded away from zero so
// the support survives thresholding, sign-balanced.
inline Matrix assign_weights(const IntMatrix& b, Rng& rng) {
  Matrix w = Matrix::Zero(b.rows(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      if (b(i, j) == 0) continue;
      const double magnitude = rng.uniform(0.5, 2.0);
      w(i, j) = rng.bernoulli(0.5) ? magnitude : -magnitude;
    }
  return w;
}

namespace detail {

inline Matrix draw_noise(const NoiseSpec& spec, int n, int d, Rng& rng) {
  Matrix z(n, d);
  Vector sigma = Vector::Ones(d);
  if (spec.kind == NoiseKind::kGaussNv)
    for (int j = 0; j < d; ++j) sigma(j) = rng.uniform(spec.sigma_min, spec.sigma_max);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) {
      switch (spec.kind) {
        case NoiseKind::kGaussEv: z(i, j) = rng.normal(); break;
        case NoiseKind::kGaussNv: z(i, j) = sigma(j) * rng.normal(); break;
        case NoiseKind::kExp: z(i, j) = rng.exponential(); break;
        case NoiseKind::kGumbel: z(i, j) = rng.gumbel(); break;
      }
    }
  return z;
}

}  // namespace detail

// X = W'X + z solved by forward substitution along a topological order of W.
inline Matrix simulate_linear(const Matrix& w_true, const NoiseSpec& noise, int n, Rng& rng) {
  const int d = static_cast<int>(w_true.rows());
  const Permutation order = topological_sort(w_true);
  Matrix x = detail::draw_noise(noise, n, d, rng);
  for (int p = 0; p < d; ++p) {
    const int j = order.node_at(p);
    x.col(j) += x * w_true.col(j);
  }
  return x;
}

// Binary SEM: X_j ~ Bernoulli(sigmoid(w_j . X)), parents first.
inline Matrix simulate_logistic(const Matrix& w_true, int n, Rng& rng) {
  const int d = static_cast<int>(w_true.rows());
  const Permutation order = topological_sort(w_true);
  Matrix x = Matrix::Zero(n, d);
  for (int p = 0; p < d; ++p) {
    const int j = order.node_at(p);
    const Vector logits = x * w_true.col(j);
    for (int i = 0; i < n; ++i)
      x(i, j) = rng.bernoulli(1.0 / (1.0 + std::exp(-logits(i)))) ? 1.0 : 0.0;
  }
  return x;
}

// Nonlinear SEM: each node is a random single-hidden-layer MLP of its
// parents plus unit Gaussian noise.  Weights reuse the linear law
// (+-[0.5, 2]) on parent columns and the output layer; non-parent columns
// stay structurally zero.  Returns the generating model and the sample.
inline std::pair<ParamSet, Matrix> simulate_mlp(const IntMatrix& b, const HiddenSpec& spec, int n,
                                                Rng& rng) {
  const int d = static_cast<int>(b.rows());
  ParamSet truth = ParamSet::mlp_zero(d, spec.m1);
  for (int j = 0; j < d; ++j) {
    auto& a1 = truth.a1[static_cast<std::size_t>(j)];
    bool has_parent = false;
    for (int i = 0; i < d; ++i) {
      if (i == j || b(i, j) == 0) continue;
      has_parent = true;
      for (int r = 0; r < spec.m1; ++r) {
        const double magnitude = rng.uniform(0.5, 2.0);
        a1(r, i) = rng.bernoulli(0.5) ? magnitude : -magnitude;
      }
    }
    // Parentless nodes are pure noise; their output layer stays zero so the
    // generating model's forward pass matches the simulation exactly.
    if (!has_parent) continue;
    auto& a2 = truth.a2[static_cast<std::size_t>(j)];
    for (int r = 0; r < spec.m1; ++r) {
      const double magnitude = rng.uniform(0.5, 2.0);
      a2(r) = rng.bernoulli(0.5) ? magnitude : -magnitude;
    }
  }

  Matrix bd = b.cast<double>();
  const Permutation order = topological_sort(bd);
  Matrix x(n, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
  for (int p = 0; p < d; ++p) {
    const int j = order.node_at(p);
    const auto& a1 = truth.a1[static_cast<std::size_t>(j)];
    const auto& a2 = truth.a2[static_cast<std::size_t>(j)];
    if (a2.cwiseAbs().sum() == 0.0) continue;  // root: pure noise
    const Matrix hidden = sigmoid(x * a1.transpose());
    x.col(j) += hidden * a2;
  }
  return {std::move(truth), std::move(x)};
}

}  // namespace toposwap
