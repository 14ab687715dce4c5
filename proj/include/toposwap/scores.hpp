#pragma once

// Score functions Q(theta).  All four decompose over nodes given the
// predictions, which is what lets a swap's effect be reasoned about node by
// node.  Penalties are part of Q: the candidate machinery sees penalized
// gradients, with the subgradient of |.| taken as 0 at 0.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/models.hpp"

namespace toposwap {

enum class ScoreKind { kLeastSquares, kGaussianNll, kLogistic, kPopulationLs };

inline std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kLeastSquares: return "ls";
    case ScoreKind::kGaussianNll: return "nll-mcp";
    case ScoreKind::kLogistic: return "logistic";
    case ScoreKind::kPopulationLs: return "population";
  }
  return "?";
}

inline ScoreKind score_from_string(const std::string& name) {
  if (name == "ls") return ScoreKind::kLeastSquares;
  if (name == "nll-mcp") return ScoreKind::kGaussianNll;
  if (name == "logistic") return ScoreKind::kLogistic;
  if (name == "population") return ScoreKind::kPopulationLs;
  throw ConfigError("unknown score: " + name);
}

struct ScoreSpec {
  ScoreKind kind = ScoreKind::kLeastSquares;
  double mcp_lambda = 0.005;  // MCP slope at the origin
  double mcp_beta = 10.0;     // MCP concavity span; flat beyond beta*lambda
  double l1_lambda = 0.01;    // logistic L1 weight
  // Ground-truth coefficients for the population score.
  std::optional<Matrix> population_truth;

  // All four scores decompose over nodes.
  bool separable() const { return true; }
};

struct ScoreEval {
  double value = 0.0;
  ParamSet grad;
  bool separable = true;
};

// Minimax concave penalty.  Continuous at beta*lambda where it flattens out
// at beta*lambda^2/2.
inline double mcp(double w, double lambda, double beta) {
  const double a = std::abs(w);
  if (a <= beta * lambda) return lambda * a - a * a / (2.0 * beta);
  return beta * lambda * lambda / 2.0;
}

inline double mcp_slope(double w, double lambda, double beta) {
  const double a = std::abs(w);
  if (a == 0.0 || a > beta * lambda) return 0.0;
  return (lambda - a / beta) * (w > 0.0 ? 1.0 : -1.0);
}

namespace detail {

// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

// Adds d p(W(theta)_ij) / d theta to grad, where p has slope p_slope at the
// aggregated weight.  Works for both parametrizations because
// d ||theta_ij||_1 / d theta_ijr = sign(theta_ijr), taken as 0 at 0.
template <typename SlopeFn>
inline void add_weight_penalty_grad(const ParamSet& params, ParamSet& grad, SlopeFn p_slope) {
  const int d = params.d;
  const Matrix w = weight_matrix(params);
  if (params.kind == ModelKind::kLinear) {
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        if (i == j || params.theta(i, j) == 0.0) continue;
        grad.theta(i, j) += p_slope(w(i, j)) * (params.theta(i, j) > 0.0 ? 1.0 : -1.0);
      }
    return;
  }
  for (int j = 0; j < d; ++j) {
    const auto& a1 = params.a1[static_cast<std::size_t>(j)];
    auto& g1 = grad.a1[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i) {
      if (i == j) continue;
      const double slope = p_slope(w(i, j));
      if (slope == 0.0) continue;
      for (int r = 0; r < a1.rows(); ++r) {
        const double t = a1(r, i);
        if (t != 0.0) g1(r, i) += slope * (t > 0.0 ? 1.0 : -1.0);
      }
    }
  }
}

inline Matrix population_covariance(const Matrix& w_true) {
  const auto d = w_true.rows();
  if (w_true.cols() != d) throw DimensionMismatchError("population score: truth must be square");
  const Matrix a = Matrix::Identity(d, d) - w_true;
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw SingularTruthError("population score: I - W_true is singular");
  const Matrix a_inv = lu.inverse();
  // Cov(X) for X = W'X + z with unit noise: (I - W')^-1 (I - W)^-1.
  return a_inv.transpose() * a_inv;
}

}  // namespace detail

// (1/2n) sum_j ||x_j - f_j(X)||^2, unregularized.
inline ScoreEval least_squares(const ParamSet& params, const Matrix& x) {
  const double n = static_cast<double>(x.rows());
  if (n == 0) throw DimensionMismatchError("least_squares: empty data");
  const Matrix residual = x - model_forward(params, x);
  ScoreEval eval;
  eval.value = residual.squaredNorm() / (2.0 * n);
  eval.grad = model_backward(params, x, Matrix(-residual / n));
  return eval;
}

// (1/2) sum_j log ||x_j - f_j(X)||^2 plus an MCP penalty on W(theta).
// The log-of-norm form absorbs per-node noise scales, which is the point of
// using it under non-equal-variance noise.
//
// floor_residuals: the solver evaluates with the 1e-12 floor instead of
// throwing so that a line search stepping onto an interpolating fit can back
// off; interactive use keeps the throwing contract.
inline ScoreEval gaussian_nll(const ParamSet& params, const Matrix& x, double lambda, double beta,
                              bool floor_residuals = false, bool* floor_hit = nullptr) {
  const double n = static_cast<double>(x.rows());
  if (n == 0) throw DimensionMismatchError("gaussian_nll: empty data");
  const Matrix residual = x - model_forward(params, x);
  ScoreEval eval;
  eval.grad = zero_like(params);
  Matrix pred_grad(x.rows(), params.d);
  double value = 0.0;
  for (int j = 0; j < params.d; ++j) {
    double sq = residual.col(j).squaredNorm();
    if (sq < 1e-12) {
      if (!floor_residuals) throw ZeroResidualError("gaussian_nll: residual norm below 1e-12");
      if (floor_hit) *floor_hit = true;
      sq = 1e-12;
    }
    value += 0.5 * std::log(sq);
    pred_grad.col(j) = -residual.col(j) / sq;
  }
  eval.grad = model_backward(params, x, pred_grad);
  const Matrix w = weight_matrix(params);
  for (int j = 0; j < params.d; ++j)
    for (int i = 0; i < params.d; ++i)
      if (i != j) value += mcp(w(i, j), lambda, beta);
  detail::add_weight_penalty_grad(params, eval.grad,
                                  [&](double wij) { return mcp_slope(wij, lambda, beta); });
  eval.value = value;
  return eval;
}

// (1/n) sum_j 1'(log(1 + exp f_j) - x_j o f_j) plus lambda * ||W(theta)||_1.
inline ScoreEval logistic_score(const ParamSet& params, const Matrix& x, double lambda) {
  const double n = static_cast<double>(x.rows());
  if (n == 0) throw DimensionMismatchError("logistic_score: empty data");
  for (Eigen::Index idx = 0; idx < x.size(); ++idx)
    if (x(idx) != 0.0 && x(idx) != 1.0)
      throw NonBinaryDataError("logistic_score: observations must be exactly 0 or 1");
  const Matrix f = model_forward(params, x);
  double value = 0.0;
  for (Eigen::Index j = 0; j < f.cols(); ++j)
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      value += detail::softplus(f(i, j)) - x(i, j) * f(i, j);
  value /= n;
  ScoreEval eval;
  eval.grad = model_backward(params, x, Matrix((sigmoid(f) - x) / n));
  const Matrix w = weight_matrix(params);
  value += lambda * w.sum();
  detail::add_weight_penalty_grad(params, eval.grad, [&](double) { return lambda; });
  eval.value = value;
  return eval;
}

// Infinite-sample least squares against a known linear truth:
// Q(W) = tr((I - W)' Sigma (I - W)) with Sigma the model covariance under
// unit noise.  Equals d at W_true; data plays no role.
inline ScoreEval population_ls(const ParamSet& params, const Matrix& w_true) {
  if (params.kind != ModelKind::kLinear)
    throw ConfigError("population score is defined for the linear parametrization only");
  if (w_true.rows() != params.d) throw DimensionMismatchError("population score: truth width != d");
  const Matrix sigma = detail::population_covariance(w_true);
  const auto d = w_true.rows();
  const Matrix residual_map = Matrix::Identity(d, d) - params.theta;
  ScoreEval eval;
  eval.value = (residual_map.transpose() * sigma * residual_map).trace();
  eval.grad = ParamSet::linear_zero(params.d);
  eval.grad.theta = 2.0 * sigma * (params.theta - Matrix::Identity(d, d));
  eval.grad.theta.diagonal().setZero();
  return eval;
}

// Single entry point the solver and search use.
inline ScoreEval evaluate_score(const ScoreSpec& spec, const ParamSet& params, const Matrix& x,
                                bool floor_residuals = false, bool* floor_hit = nullptr) {
  switch (spec.kind) {
    case ScoreKind::kLeastSquares: return least_squares(params, x);
    case ScoreKind::kGaussianNll:
      return gaussian_nll(params, x, spec.mcp_lambda, spec.mcp_beta, floor_residuals, floor_hit);
    case ScoreKind::kLogistic: return logistic_score(params, x, spec.l1_lambda);
    case ScoreKind::kPopulationLs:
      if (!spec.population_truth) throw ConfigError("population score needs ground-truth weights");
      return population_ls(params, *spec.population_truth);
  }
  throw ConfigError("unhandled score kind");
}

}  // namespace toposwap
