#pragma once

// Order-constrained minimization: given a topological order pi, minimize the
// score over parameters whose induced graph points forward under pi.  Two
// regimes:
//
//  * linear least squares (sample or population) collapses to one ordinary
//    least-squares problem per node over its permitted predecessors, solved
//    through the normal equations on a Gram matrix;
//  * everything else runs a masked first-order loop (Adam-style by default,
//    falling back to Armijo backtracking to finish), where forbidden
//    coordinates are zeroed in both iterates and gradients.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/models.hpp"
#include "toposwap/scores.hpp"

namespace toposwap {

enum class StepRule { kBacktracking, kAdaptiveMoment };

struct SolveOptions {
  // Convergence is declared when the sup-norm of the gradient over free
  // coordinates drops to this.  Unset means 1e-6 on the closed-form path and
  // 1e-5 on the iterative one.
  std::optional<double> stationarity_tol;
  int max_iters = 10000;
  StepRule step_rule = StepRule::kAdaptiveMoment;
  double learning_rate = 0.05;
  std::uint64_t init_seed = 0;  // seeds the MLP cold-start init
  std::optional<ParamSet> warm_start;
};

struct OrderSolution {
  ParamSet theta;
  double score_value = 0.0;
  double grad_inf_norm = 0.0;     // over free coordinates
  bool converged = false;
  bool jitter_applied = false;    // rank-deficient normal equations were regularized
  bool residual_floor_hit = false;
};

namespace detail {

inline constexpr double kExactTol = 1e-6;
inline constexpr double kIterativeTol = 1e-5;
inline constexpr double kJitter = 1e-10;

// Q(W) = scale * tr((I - W)' m (I - W)).  Covers sample least squares
// (m = X'X/n, scale 1/2) and the population score (m = Sigma, scale 1).
struct QuadraticContext {
  Matrix m;
  double scale = 0.5;
};

inline std::optional<QuadraticContext> make_quadratic_context(const ScoreSpec& spec,
                                                              ModelKind kind, const Matrix& x) {
  if (kind != ModelKind::kLinear) return std::nullopt;
  if (spec.kind == ScoreKind::kLeastSquares) {
    if (x.rows() == 0) throw DimensionMismatchError("least squares: empty data");
    QuadraticContext ctx;
    ctx.m = (x.transpose() * x) / static_cast<double>(x.rows());
    ctx.scale = 0.5;
    return ctx;
  }
  if (spec.kind == ScoreKind::kPopulationLs) {
    if (!spec.population_truth) throw ConfigError("population score needs ground-truth weights");
    QuadraticContext ctx;
    ctx.m = population_covariance(*spec.population_truth);
    ctx.scale = 1.0;
    return ctx;
  }
  return std::nullopt;
}

inline OrderSolution solve_order_exact(const Permutation& pi, const QuadraticContext& ctx,
                                       double tol) {
  const int d = pi.size();
  OrderSolution sol;
  sol.theta = ParamSet::linear_zero(d);

  for (int pos = 1; pos < d; ++pos) {
    const int j = pi.node_at(pos);
    Eigen::VectorXi preds(pos);
    for (int p = 0; p < pos; ++p) preds(p) = pi.node_at(p);
    Matrix a = ctx.m(preds, preds);
    Vector b = ctx.m(preds, Eigen::VectorXi::Constant(1, j)).col(0);
    Eigen::LDLT<Matrix> ldlt(a);
    Vector beta = ldlt.solve(b);
    const double b_scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || (a * beta - b).cwiseAbs().maxCoeff() > 1e-8 * b_scale) {
      // Rank-deficient predecessors (collinear columns); Tikhonov nudge picks
      // one of the equivalent minimizers deterministically.
      a.diagonal().array() += kJitter;
      beta = Eigen::LDLT<Matrix>(a).solve(b);
      sol.jitter_applied = true;
    }
    for (int p = 0; p < pos; ++p) sol.theta.theta(preds(p), j) = beta(p);
  }

  const Matrix residual_map = Matrix::Identity(d, d) - sol.theta.theta;
  sol.score_value = ctx.scale * (residual_map.transpose() * ctx.m * residual_map).trace();
  const Matrix grad = 2.0 * ctx.scale * ctx.m * (sol.theta.theta - Matrix::Identity(d, d));
  double grad_inf = 0.0;
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (i != j && pi.before(i, j)) grad_inf = std::max(grad_inf, std::abs(grad(i, j)));
  sol.grad_inf_norm = grad_inf;
  sol.converged = grad_inf <= tol;
  return sol;
}

// Score value without the gradient; line searches live on this.
inline double score_value_only(const ScoreSpec& spec, const ParamSet& params, const Matrix& x,
                               bool* floor_hit) {
  if (spec.kind == ScoreKind::kPopulationLs) return population_ls(params, *spec.population_truth).value;
  if (spec.kind == ScoreKind::kLeastSquares) {
    const Matrix residual = x - model_forward(params, x);
    return residual.squaredNorm() / (2.0 * static_cast<double>(x.rows()));
  }
  if (spec.kind == ScoreKind::kGaussianNll) {
    const Matrix residual = x - model_forward(params, x);
    double value = 0.0;
    for (int j = 0; j < params.d; ++j) {
      double sq = residual.col(j).squaredNorm();
      if (sq < 1e-12) {
        if (floor_hit) *floor_hit = true;
        sq = 1e-12;
      }
      value += 0.5 * std::log(sq);
    }
    const Matrix w = weight_matrix(params);
    for (int j = 0; j < params.d; ++j)
      for (int i = 0; i < params.d; ++i)
        if (i != j) value += mcp(w(i, j), spec.mcp_lambda, spec.mcp_beta);
    return value;
  }
  // Logistic: reuse the full evaluation; the gradient is not the dominant
  // cost there.
  return logistic_score(params, x, spec.l1_lambda).value;
}

inline OrderSolution solve_order_iterative(const Permutation& pi, const ScoreSpec& spec,
                                           ModelKind kind, const Matrix& x,
                                           const SolveOptions& opts, const HiddenSpec& hidden) {
  const int d = pi.size();
  const double tol = opts.stationarity_tol.value_or(kIterativeTol);

  ParamSet theta;
  if (opts.warm_start) {
    theta = *opts.warm_start;
    mask_to_order(theta, pi);
  } else if (kind == ModelKind::kLinear) {
    theta = ParamSet::linear_zero(d);
  } else {
    Rng init_rng(opts.init_seed);
    theta = mlp_random_init(d, hidden, init_rng);
    mask_to_order(theta, pi);
  }

  OrderSolution sol;
  bool floor_hit = false;

  ParamSet adam_m = zero_like(theta);
  ParamSet adam_v = zero_like(theta);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  double lr = opts.learning_rate;
  bool adam_phase = opts.step_rule == StepRule::kAdaptiveMoment;
  int adam_t = 0;
  double alpha = 0.0;  // last accepted backtracking step

  double best_value = std::numeric_limits<double>::infinity();
  ParamSet best_theta = theta;
  double plateau_ref = best_value;

  ScoreEval eval;
  double value = 0.0, gmax = 0.0;
  auto evaluate = [&](const ParamSet& p) {
    eval = evaluate_score(spec, p, x, /*floor_residuals=*/true, &floor_hit);
    mask_to_order(eval.grad, pi);
    value = eval.value;
    gmax = param_max_abs(eval.grad);
  };
  evaluate(theta);

  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
    }
    if (gmax <= tol) break;

    if (adam_phase) {
      ++adam_t;
      const double corr1 = 1.0 - std::pow(kBeta1, adam_t);
      const double corr2 = 1.0 - std::pow(kBeta2, adam_t);
      auto update = [&](auto& th, const auto& g, auto& m, auto& v) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
        th.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + kAdamEps);
      };
      if (theta.kind == ModelKind::kLinear) {
        update(theta.theta, eval.grad.theta, adam_m.theta, adam_v.theta);
      } else {
        for (std::size_t j = 0; j < theta.a1.size(); ++j) {
          update(theta.a1[j], eval.grad.a1[j], adam_m.a1[j], adam_v.a1[j]);
          update(theta.a2[j], eval.grad.a2[j], adam_m.a2[j], adam_v.a2[j]);
        }
      }
      mask_to_order(theta, pi);  // keep masked coordinates exactly zero
      evaluate(theta);
      // Halve the rate when progress stalls; once it bottoms out, finish
      // with a monotone backtracking phase that can actually certify
      // stationarity.
      if (adam_t % 200 == 0) {
        if (plateau_ref - best_value < 1e-12 * (1.0 + std::abs(best_value))) {
          lr *= 0.5;
          if (lr < 1e-4) {
            adam_phase = false;
            theta = best_theta;
            evaluate(theta);
          }
        }
        plateau_ref = best_value;
      }
      continue;
    }

    // Armijo backtracking along the negative gradient.
    const double g_sq = param_dot(eval.grad, eval.grad);
    if (alpha <= 0.0) alpha = 1.0 / (1.0 + gmax);
    alpha *= 2.0;
    bool stepped = false;
    while (alpha > 1e-18) {
      ParamSet candidate = theta;
      param_axpy(-alpha, eval.grad, candidate);
      const double cand_value = score_value_only(spec, candidate, x, &floor_hit);
      if (cand_value <= value - 1e-4 * alpha * g_sq) {
        theta = std::move(candidate);
        evaluate(theta);
        stepped = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!stepped) break;  // no descent direction at fp resolution
  }

  if (value < best_value) {
    best_value = value;
    best_theta = theta;
  }
  // A stationary final iterate stands even when some earlier iterate scored
  // lower: the contract is stationarity.  Otherwise report the best seen,
  // with its own gradient norm.
  if (!(gmax <= tol)) {
    theta = best_theta;
    evaluate(theta);
  }
  sol.theta = std::move(theta);
  sol.score_value = value;
  sol.grad_inf_norm = gmax;
  sol.converged = gmax <= tol;
  sol.residual_floor_hit = floor_hit;
  return sol;
}

}  // namespace detail

// True when (spec, kind) is handled by the closed-form per-node path.
inline bool has_exact_solver(const ScoreSpec& spec, ModelKind kind) {
  return kind == ModelKind::kLinear &&
         (spec.kind == ScoreKind::kLeastSquares || spec.kind == ScoreKind::kPopulationLs);
}

inline OrderSolution solve_order(const Permutation& pi, const ScoreSpec& spec, ModelKind kind,
                                 const Matrix& x, const SolveOptions& opts = {},
                                 const HiddenSpec& hidden = {}) {
  if (spec.kind != ScoreKind::kPopulationLs && x.cols() != pi.size())
    throw DimensionMismatchError("solve_order: data width != order size");
  if (spec.kind == ScoreKind::kPopulationLs && spec.population_truth &&
      spec.population_truth->rows() != pi.size())
    throw DimensionMismatchError("solve_order: truth width != order size");
  if (auto ctx = detail::make_quadratic_context(spec, kind, x))
    return detail::solve_order_exact(pi, *ctx, opts.stationarity_tol.value_or(detail::kExactTol));
  return detail::solve_order_iterative(pi, spec, kind, x, opts, hidden);
}

struct SwapResult {
  std::pair<int, int> pair;
  std::optional<OrderSolution> solution;
  std::string error;  // nonempty when this swap's solve threw
};

// Solves the order obtained by positionally swapping each pair's nodes,
// warm-starting every solve from `base`.  Results are indexed like `pairs`
// regardless of execution order, so the threaded path is bit-identical to
// the sequential one.
inline std::vector<SwapResult> solve_all_swaps(const OrderSolution& base, const Permutation& pi,
                                               const std::vector<std::pair<int, int>>& pairs,
                                               const ScoreSpec& spec, ModelKind kind,
                                               const Matrix& x, const SolveOptions& opts = {},
                                               const HiddenSpec& hidden = {},
                                               bool parallel = false) {
  std::vector<SwapResult> results(pairs.size());
  std::optional<detail::QuadraticContext> ctx = detail::make_quadratic_context(spec, kind, x);
  const double exact_tol = opts.stationarity_tol.value_or(detail::kExactTol);

  auto solve_one = [&](std::size_t idx) {
    results[idx].pair = pairs[idx];
    try {
      const Permutation swapped = swap_nodes(pi, pairs[idx].first, pairs[idx].second);
      if (ctx) {
        results[idx].solution = detail::solve_order_exact(swapped, *ctx, exact_tol);
      } else {
        SolveOptions warm_opts = opts;
        warm_opts.warm_start = base.theta;
        results[idx].solution = detail::solve_order_iterative(swapped, spec, kind, x, warm_opts, hidden);
      }
    } catch (const Error& e) {
      results[idx].error = e.what();
    }
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (!parallel || hw < 2 || pairs.size() < 2) {
    for (std::size_t idx = 0; idx < pairs.size(); ++idx) solve_one(idx);
    return results;
  }
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(pairs.size()));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (unsigned t = 0; t < workers; ++t)
    threads.emplace_back([&, t] {
      for (std::size_t idx = t; idx < pairs.size(); idx += workers) solve_one(idx);
    });
  for (auto& th : threads) th.join();
  return results;
}

}  // namespace toposwap
