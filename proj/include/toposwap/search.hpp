#pragma once

// The outer search over topological orders.  At an order-constrained
// solution, a pair (i, j) is a candidate when the acyclicity gradient says
// inserting edge i -> j cannot close a cycle ([grad h]_ij ~ 0) while the
// score gradient says the edge is wanted (||dQ/dtheta_ij||_1 large).  The
// loop probes candidate swaps, keeps strict improvements, widens the
// candidate set via a threshold search when the strict set is empty, and
// certifies the final solution through the KKT residual matrix.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "toposwap/acyclicity.hpp"
#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/models.hpp"
#include "toposwap/scores.hpp"
#include "toposwap/solver.hpp"

namespace toposwap {

// Edge-gradient L1 values at or below this count as zero in the candidate
// partition, mirroring kWalkZeroTol on the acyclicity side.  Closed-form
// solves leave ~1e-12-scale noise on free coordinates; genuine sample
// gradients sit orders of magnitude above.
inline constexpr double kEdgeGradZeroTol = 1e-9;

// Step size of the opt-2 probe that decides where a candidate edge would
// place its endpoints.
inline constexpr double kProbeStep = 1e-8;

// Threshold grids for the candidate-set size search.  The tau side must
// reach O(1): when the data was generated against the current order, the
// reverse influence of a true edge shows up as a walk of weight around the
// regression coefficient, and the search can only undo the reversal if some
// tau admits it.  The sub-1e-3 rungs keep the set tight whenever near-zero
// entries suffice.
inline std::vector<double> default_tau_grid() {
  return {0.0,  1e-8, 1e-7, 1e-6, 5e-6, 1e-5, 5e-5, 1e-4,
          1e-3, 1e-2, 5e-2, 1e-1, 5e-1, 1.0,  5.0,  10.0};
}

inline std::vector<double> default_xi_grid() {
  return {5e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1, 5e-1, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 40.0};
}

struct SearchConfig {
  // Candidate-set size targets; unset fields fall back to defaults keyed on
  // d (30/45/10 up to d=10, 50/190/20 at 20, 100/1000/10 at 50, 150/2500/15
  // at 100+, linear in between).
  std::optional<int> s_small;
  std::optional<int> s_large;
  std::optional<int> s0;
  std::vector<double> tau_grid = default_tau_grid();
  std::vector<double> xi_grid = default_xi_grid();
  bool greedy = false;        // accept the first improving swap instead of the best
  AcyclicityKind h_kind = AcyclicityKind::kPolynomial;
  double kkt_tol = 1e-6;
  int max_outer_iters = 500;  // hard stop; termination otherwise comes from strict descent
  bool parallel_swaps = false;
};

struct SearchSizes {
  int s_small = 0;
  int s_large = 0;
  int s0 = 0;
};

inline SearchSizes default_search_sizes(int d) {
  struct Row {
    int d, small, large, s0;
  };
  // At d <= 20 a large round is cheap, so the large space targets every
  // ordered pair and the escape budget is generous; dense instances stall
  // well short of their best reachable order on single-escape budgets.
  static constexpr Row rows[] = {{10, 30, 45, 10}, {20, 50, 190, 20}, {50, 100, 1000, 10}, {100, 150, 2500, 15}};
  if (d <= rows[0].d) return {rows[0].small, rows[0].large, rows[0].s0};
  if (d >= rows[3].d) return {rows[3].small, rows[3].large, rows[3].s0};
  for (int r = 0; r < 3; ++r) {
    if (d > rows[r + 1].d) continue;
    const double t = static_cast<double>(d - rows[r].d) / (rows[r + 1].d - rows[r].d);
    auto lerp = [t](int a, int b) { return static_cast<int>(std::lround(a + t * (b - a))); };
    return {lerp(rows[r].small, rows[r + 1].small), lerp(rows[r].large, rows[r + 1].large),
            lerp(rows[r].s0, rows[r + 1].s0)};
  }
  return {rows[3].small, rows[3].large, rows[3].s0};
}

namespace detail {

// Per-pair quantities the candidate tests run on, with both numerical-zero
// clamps already applied.
struct PairTable {
  int d = 0;
  Matrix h_gradient;   // clamped
  Matrix edge_grads;   // clamped L1 norms
};

inline PairTable make_pair_table(const ParamSet& params, const ParamSet& grad,
                                 AcyclicityKind kind) {
  PairTable table;
  table.d = params.d;
  table.h_gradient = h_grad(kind, weight_matrix(params));
  table.edge_grads = Matrix::Zero(params.d, params.d);
  for (int j = 0; j < params.d; ++j)
    for (int i = 0; i < params.d; ++i) {
      if (i == j) continue;
      if (table.h_gradient(i, j) <= kWalkZeroTol) table.h_gradient(i, j) = 0.0;
      const double g = edge_grad_l1(grad, i, j);
      table.edge_grads(i, j) = g <= kEdgeGradZeroTol ? 0.0 : g;
    }
  return table;
}

inline std::vector<std::pair<int, int>> collect_candidates(const PairTable& table, double tau,
                                                           double xi) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < table.d; ++i)
    for (int j = 0; j < table.d; ++j) {
      if (i == j) continue;
      if (table.h_gradient(i, j) <= tau && table.edge_grads(i, j) > xi) pairs.emplace_back(i, j);
    }
  return pairs;
}

inline int count_candidates(const PairTable& table, double tau, double xi) {
  int count = 0;
  for (int i = 0; i < table.d; ++i)
    for (int j = 0; j < table.d; ++j)
      if (i != j && table.h_gradient(i, j) <= tau && table.edge_grads(i, j) > xi) ++count;
  return count;
}

inline std::pair<double, double> find_params_on(const PairTable& table, int q,
                                                const SearchConfig& config) {
  int best_objective = std::numeric_limits<int>::max();
  std::pair<double, double> best = {0.0, 0.0};
  // tau ascending, xi descending: the first strict improvement wins, which
  // realizes the smallest-tau-then-largest-xi tie-break.
  for (double tau : config.tau_grid) {
    for (auto it = config.xi_grid.rbegin(); it != config.xi_grid.rend(); ++it) {
      const int objective = std::abs(q - count_candidates(table, tau, *it));
      if (objective < best_objective) {
        best_objective = objective;
        best = {tau, *it};
      }
    }
  }
  return best;
}

}  // namespace detail

// Y(theta, tau, xi): ordered pairs whose insertion looks cycle-safe and
// score-relevant.  Lexicographically sorted.
inline std::vector<std::pair<int, int>> candidate_set(const ParamSet& params, const ParamSet& grad,
                                                      double tau, double xi, AcyclicityKind kind) {
  return detail::collect_candidates(detail::make_pair_table(params, grad, kind), tau, xi);
}

// Grid point minimizing | q - |Y(theta, tau, xi)| |; ties broken toward the
// smallest tau, then the largest xi.
inline std::pair<double, double> find_params(const ParamSet& params, const ParamSet& grad, int q,
                                             const SearchConfig& config, AcyclicityKind kind) {
  if (config.tau_grid.empty() || config.xi_grid.empty())
    throw ConfigError("find_params: empty threshold grid");
  return detail::find_params_on(detail::make_pair_table(params, grad, kind), q, config);
}

// Derives the next order to try from candidate pair (i, j).
//  opt 1: positional swap of i and j.
//  opt 2: nudge theta_ij against the score gradient and re-sort the support;
//         the fresh edge forces i ahead of j while the rest of the structure
//         is preserved.
inline Permutation update_sort(const ParamSet& params, const ParamSet& grad, const Permutation& pi,
                               std::pair<int, int> pair, int opt) {
  const auto [i, j] = pair;
  if (i < 0 || j < 0 || i >= params.d || j >= params.d || i == j)
    throw ConfigError("update_sort: pair out of range");
  if (opt == 1) return swap_nodes(pi, i, j);
  if (opt != 2) throw ConfigError("update_sort: opt must be 1 or 2");
  ParamSet probe = params;
  if (params.kind == ModelKind::kLinear) {
    probe.theta(i, j) -= kProbeStep * grad.theta(i, j);
  } else {
    probe.a1[static_cast<std::size_t>(j)].col(i) -=
        kProbeStep * grad.a1[static_cast<std::size_t>(j)].col(i);
  }
  try {
    return topological_sort(weight_matrix(probe));
  } catch (const CyclicGraphError&) {
    throw CyclicProbeError("update_sort: probed edge closes a cycle; pair is not insertable");
  }
}

// KKT residual matrix.  Where no walk exists the stationarity residual is
// the edge gradient; where a walk exists the complementarity residual is the
// aggregated weight itself.  The max entry is the certificate quality.
inline Matrix kkt_matrix(const ParamSet& params, const ParamSet& grad, AcyclicityKind kind) {
  const Matrix w = weight_matrix(params);
  try {
    topological_sort(w);
  } catch (const CyclicGraphError&) {
    throw NotADagError("kkt_matrix: parameters do not describe a DAG");
  }
  const Matrix gh = h_grad(kind, w);
  Matrix k = Matrix::Zero(params.d, params.d);
  for (int j = 0; j < params.d; ++j)
    for (int i = 0; i < params.d; ++i) {
      if (i == j) continue;
      k(i, j) = gh(i, j) <= kWalkZeroTol ? edge_grad_l1(grad, i, j) : w(i, j);
    }
  return k;
}

inline int kkt_flag(const Matrix& kkt, double tol = 1e-6) {
  return kkt.size() == 0 || kkt.cwiseAbs().maxCoeff() <= tol ? 1 : 0;
}

// Connectedness in the sense that every earlier node reaches every later
// node through the fitted graph; the hypothesis under which termination at
// an empty candidate set certifies a KKT point.
inline bool is_connected_estimator(const ParamSet& params, const Permutation& pi,
                                   AcyclicityKind kind) {
  const Matrix gh = h_grad(kind, weight_matrix(params));
  for (int p = 0; p < pi.size(); ++p)
    for (int q = p + 1; q < pi.size(); ++q)
      if (gh(pi.node_at(q), pi.node_at(p)) <= kWalkZeroTol) return false;
  return true;
}

struct IterationRecord {
  std::vector<int> order;
  double score = 0.0;
  std::optional<std::pair<int, int>> swap;  // empty on the initial solve
  int candidate_count = 0;
  bool large_space = false;
  double wall_time_s = 0.0;  // elapsed since search start when accepted
};

struct RunReport {
  std::vector<IterationRecord> iterations;
  Permutation final_order{std::vector<int>{}};
  OrderSolution final_solution;
  int kkt = 0;
  double kkt_max_violation = 0.0;
  double total_wall_time_s = 0.0;
  bool hard_stop = false;  // outer-iteration cap hit
  SearchSizes sizes;
};

namespace detail {

struct ResolvedSearch {
  SearchSizes sizes;
  SearchConfig config;
};

inline ResolvedSearch resolve_search_config(const SearchConfig& config, int d) {
  ResolvedSearch r;
  r.config = config;
  const SearchSizes defaults = default_search_sizes(d);
  r.sizes.s_small = config.s_small.value_or(defaults.s_small);
  r.sizes.s_large = config.s_large.value_or(defaults.s_large);
  r.sizes.s0 = config.s0.value_or(defaults.s0);
  if (r.sizes.s_small < 1) throw ConfigError("search: s_small must be >= 1");
  if (r.sizes.s_large <= r.sizes.s_small) throw ConfigError("search: s_large must exceed s_small");
  if (r.sizes.s0 < 0) throw ConfigError("search: s0 must be >= 0");
  if (config.max_outer_iters < 1) throw ConfigError("search: max_outer_iters must be >= 1");
  if (!(config.kkt_tol > 0.0)) throw ConfigError("search: kkt_tol must be positive");
  auto prepare = [](std::vector<double>& grid, const char* name) {
    if (grid.empty()) throw ConfigError(std::string("search: empty ") + name);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.front() < 0.0) throw ConfigError(std::string(name) + " values must be nonnegative");
  };
  prepare(r.config.tau_grid, "tau_grid");
  prepare(r.config.xi_grid, "xi_grid");
  if (r.config.tau_grid.front() != 0.0) throw ConfigError("search: tau_grid must include 0");
  return r;
}

}  // namespace detail

// The full bi-level search.  Strict descent drives acceptance; when the
// tight candidate set is exhausted, up to s0 rounds of the large relaxed set
// may rescue the search before it settles.
inline RunReport topo_search(const Permutation& pi0, const ScoreSpec& spec, ModelKind kind,
                             const Matrix& x, const SearchConfig& config = {},
                             const SolveOptions& solve_opts = {}, const HiddenSpec& hidden = {}) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  const int d = pi0.size();
  const auto resolved = detail::resolve_search_config(config, d);
  const AcyclicityKind h_kind = resolved.config.h_kind;

  RunReport report;
  report.sizes = resolved.sizes;

  Permutation pi = pi0;
  OrderSolution sol = solve_order(pi, spec, kind, x, solve_opts, hidden);
  report.iterations.push_back({pi.order(), sol.score_value, std::nullopt, 0, false, elapsed()});

  // Iterative solves only certify stationarity down to their tolerance, so
  // the strict branch must not mistake leftover free-coordinate gradient for
  // a wanted edge.  L1 aggregation over an edge block multiplies that noise
  // by the block length.
  const int block = kind == ModelKind::kMlp ? std::max(1, hidden.m1) : 1;
  const double xi_strict =
      has_exact_solver(spec, kind)
          ? 0.0
          : block * solve_opts.stationarity_tol.value_or(detail::kIterativeTol);

  int large_rounds = 0;
  bool exhausted = true;
  for (int outer = 0; outer < resolved.config.max_outer_iters; ++outer) {
    const ScoreEval eval = evaluate_score(spec, sol.theta, x, /*floor_residuals=*/true);
    const detail::PairTable table = detail::make_pair_table(sol.theta, eval.grad, h_kind);

    const auto [tau_small, xi_small] =
        detail::find_params_on(table, resolved.sizes.s_small, resolved.config);
    const auto small_set = detail::collect_candidates(table, tau_small, xi_small);
    if (small_set.empty()) {
      exhausted = false;
      break;
    }

    const auto strict_set = detail::collect_candidates(table, 0.0, xi_strict);
    const bool strict = !strict_set.empty();
    const auto& pairs = strict ? strict_set : small_set;

    // Evaluate one batch of candidate swaps and keep the best (or, greedy,
    // the first) strict improvement.
    auto try_batch = [&](const std::vector<std::pair<int, int>>& batch,
                         int opt) -> std::optional<std::pair<std::pair<int, int>, Permutation>> {
      std::vector<std::pair<int, int>> scan = batch;
      if (resolved.config.greedy)
        // Scan the least-entangled pairs first: swaps that disturb little of
        // the current structure improve more often, so the first-improvement
        // rule accepts early and stalls less.
        std::stable_sort(scan.begin(), scan.end(), [&](const auto& a, const auto& b) {
          return table.h_gradient(a.first, a.second) < table.h_gradient(b.first, b.second);
        });

      std::optional<std::pair<int, int>> best_pair;
      std::optional<Permutation> best_order;
      double best_score = sol.score_value;
      std::optional<OrderSolution> best_sol;
      std::map<std::vector<int>, double> seen;  // probes can collide on one order

      for (const auto& pair : scan) {
        Permutation next = pi;
        try {
          next = update_sort(sol.theta, eval.grad, pi, pair, opt);
        } catch (const CyclicProbeError&) {
          continue;
        }
        if (next == pi) continue;
        auto [it, fresh] = seen.try_emplace(next.order(), 0.0);
        OrderSolution cand;
        if (fresh) {
          SolveOptions warm = solve_opts;
          warm.warm_start = sol.theta;
          cand = solve_order(next, spec, kind, x, warm, hidden);
          it->second = cand.score_value;
        } else if (!(it->second < best_score)) {
          continue;
        } else {
          SolveOptions warm = solve_opts;
          warm.warm_start = sol.theta;
          cand = solve_order(next, spec, kind, x, warm, hidden);
        }
        if (cand.score_value < best_score) {
          best_score = cand.score_value;
          best_pair = pair;
          best_order = next;
          best_sol = std::move(cand);
          if (resolved.config.greedy) break;
        }
      }
      if (!best_pair) return std::nullopt;
      pi = *best_order;
      sol = std::move(*best_sol);
      return std::make_pair(*best_pair, pi);
    };

    if (auto accepted = try_batch(pairs, strict ? 2 : 1)) {
      report.iterations.push_back({pi.order(), sol.score_value, accepted->first,
                                   static_cast<int>(pairs.size()), false, elapsed()});
      continue;
    }

    if (large_rounds < resolved.sizes.s0) {
      const auto [tau_large, xi_large] =
          detail::find_params_on(table, resolved.sizes.s_large, resolved.config);
      const auto large_set = detail::collect_candidates(table, tau_large, xi_large);
      if (auto accepted = try_batch(large_set, 1)) {
        ++large_rounds;
        report.iterations.push_back({pi.order(), sol.score_value, accepted->first,
                                     static_cast<int>(large_set.size()), true, elapsed()});
        continue;
      }
    }
    exhausted = false;
    break;
  }
  report.hard_stop = exhausted;

  const ScoreEval final_eval = evaluate_score(spec, sol.theta, x, /*floor_residuals=*/true);
  const Matrix kkt = kkt_matrix(sol.theta, final_eval.grad, h_kind);
  report.kkt_max_violation = kkt.size() == 0 ? 0.0 : kkt.cwiseAbs().maxCoeff();
  report.kkt = kkt_flag(kkt, resolved.config.kkt_tol);
  report.final_order = pi;
  report.final_solution = std::move(sol);
  report.total_wall_time_s = elapsed();
  return report;
}

// Ground truth for small problems: solve every order and keep the best,
// ties resolved toward the lexicographically smallest order.
inline std::pair<Permutation, OrderSolution> exhaustive_oracle(const ScoreSpec& spec,
                                                               ModelKind kind, const Matrix& x,
                                                               int d,
                                                               const SolveOptions& opts = {},
                                                               const HiddenSpec& hidden = {}) {
  if (d > 8) throw TooLargeError("exhaustive_oracle: refusing d > 8 (factorial orders)");
  if (d < 1) throw ConfigError("exhaustive_oracle: d must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  std::optional<Permutation> best_order;
  OrderSolution best;
  do {
    Permutation pi(order);
    OrderSolution sol = solve_order(pi, spec, kind, x, opts, hidden);
    if (!best_order || sol.score_value < best.score_value) {
      best_order = pi;
      best = std::move(sol);
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return {*best_order, std::move(best)};
}

}  // namespace toposwap
