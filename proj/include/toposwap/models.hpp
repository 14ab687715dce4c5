#pragma once

// Model parametrizations.  A ParamSet holds either a signed d x d coefficient
// matrix (linear SEM) or one single-hidden-layer perceptron per node.  The
// induced weighted graph W(theta) aggregates, for each ordered pair (i, j),
// the L1 norm of the parameters through which node i feeds node j's
// prediction; its support is what the acyclicity machinery sees.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"
#include "toposwap/rng.hpp"

namespace toposwap {

enum class ModelKind { kLinear, kMlp };

inline std::string to_string(ModelKind kind) {
  return kind == ModelKind::kLinear ? "linear" : "mlp";
}

struct HiddenSpec {
  int m1 = 30;  // hidden width; activation is the logistic sigmoid
};

struct ParamSet {
  ModelKind kind = ModelKind::kLinear;
  int d = 0;

  // Linear: theta(i, j) is the signed coefficient of x_i in node j's
  // prediction; the diagonal is structurally zero.
  Matrix theta;

  // Mlp: per node j, a1[j] is m1 x d (column i multiplies x_i; column j is
  // structurally zero) and a2[j] is the linear output layer of length m1.
  std::vector<Matrix> a1;
  std::vector<Vector> a2;

  static ParamSet linear_zero(int d) {
    ParamSet p;
    p.kind = ModelKind::kLinear;
    p.d = d;
    p.theta = Matrix::Zero(d, d);
    return p;
  }

  static ParamSet mlp_zero(int d, int m1) {
    ParamSet p;
    p.kind = ModelKind::kMlp;
    p.d = d;
    p.a1.assign(static_cast<std::size_t>(d), Matrix::Zero(m1, d));
    p.a2.assign(static_cast<std::size_t>(d), Vector::Zero(m1));
    return p;
  }

  int m1() const { return a1.empty() ? 0 : static_cast<int>(a1.front().rows()); }
};

// Uniform init on [-0.1, 0.1] for every MLP weight, with each node's own
// input column zeroed.  Deterministic given the rng state.
inline ParamSet mlp_random_init(int d, const HiddenSpec& spec, Rng& rng) {
  ParamSet p = ParamSet::mlp_zero(d, spec.m1);
  for (int j = 0; j < d; ++j) {
    auto& a1 = p.a1[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i) {
      if (i == j) continue;
      for (int r = 0; r < spec.m1; ++r) a1(r, i) = rng.uniform(-0.1, 0.1);
    }
    for (int r = 0; r < spec.m1; ++r) p.a2[static_cast<std::size_t>(j)](r) = rng.uniform(-0.1, 0.1);
  }
  return p;
}

// W(theta): entrywise |theta| for linear, per-pair L1 over the first-layer
// column for MLPs.  Diagonal is zero by construction.
inline Matrix weight_matrix(const ParamSet& params) {
  const int d = params.d;
  if (params.kind == ModelKind::kLinear) {
    Matrix w = params.theta.cwiseAbs();
    w.diagonal().setZero();
    return w;
  }
  Matrix w = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    const auto& a1 = params.a1[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i) {
      if (i == j) continue;
      w(i, j) = a1.col(i).cwiseAbs().sum();
    }
  }
  return w;
}

inline Matrix sigmoid(const Matrix& z) {
  return 1.0 / (1.0 + (-z.array()).exp());
}

// Per-node predictions as an n x d matrix; column j is f_j(X).  MLP hidden
// layer uses the sigmoid, the output layer is linear.
inline Matrix model_forward(const ParamSet& params, const Matrix& x) {
  if (x.cols() != params.d) throw DimensionMismatchError("model_forward: data width != d");
  if (params.kind == ModelKind::kLinear) return x * params.theta;
  Matrix pred(x.rows(), params.d);
  for (int j = 0; j < params.d; ++j) {
    const Matrix hidden = sigmoid(x * params.a1[static_cast<std::size_t>(j)].transpose());
    pred.col(j) = hidden * params.a2[static_cast<std::size_t>(j)];
  }
  return pred;
}

// Pulls a gradient w.r.t. predictions (n x d, column j = dQ/df_j) back to a
// gradient over the parameters.  Structurally-zero coordinates (diagonal /
// own input column) come back as exact zeros.
inline ParamSet model_backward(const ParamSet& params, const Matrix& x, const Matrix& pred_grad) {
  if (pred_grad.rows() != x.rows() || pred_grad.cols() != params.d)
    throw DimensionMismatchError("model_backward: prediction-gradient shape mismatch");
  if (params.kind == ModelKind::kLinear) {
    ParamSet grad = ParamSet::linear_zero(params.d);
    grad.theta = x.transpose() * pred_grad;
    grad.theta.diagonal().setZero();
    return grad;
  }
  ParamSet grad = ParamSet::mlp_zero(params.d, params.m1());
  for (int j = 0; j < params.d; ++j) {
    const auto& a1 = params.a1[static_cast<std::size_t>(j)];
    const auto& a2 = params.a2[static_cast<std::size_t>(j)];
    const Matrix hidden = sigmoid(x * a1.transpose());           // n x m1
    const Vector g_out = pred_grad.col(j);                       // n
    grad.a2[static_cast<std::size_t>(j)] = hidden.transpose() * g_out;
    const Matrix g_pre =
        (g_out * a2.transpose()).cwiseProduct(hidden.cwiseProduct((1.0 - hidden.array()).matrix()));
    grad.a1[static_cast<std::size_t>(j)] = g_pre.transpose() * x;  // m1 x d
    grad.a1[static_cast<std::size_t>(j)].col(j).setZero();
  }
  return grad;
}

// L1 norm of the gradient sub-vector that belongs to edge i -> j.
inline double edge_grad_l1(const ParamSet& grad, int i, int j) {
  if (grad.kind == ModelKind::kLinear) return std::abs(grad.theta(i, j));
  return grad.a1[static_cast<std::size_t>(j)].col(i).cwiseAbs().sum();
}

// --- parameter-space arithmetic used by the first-order solver ---

inline ParamSet zero_like(const ParamSet& p) {
  return p.kind == ModelKind::kLinear ? ParamSet::linear_zero(p.d) : ParamSet::mlp_zero(p.d, p.m1());
}

inline void param_axpy(double alpha, const ParamSet& x, ParamSet& y) {
  if (x.kind == ModelKind::kLinear) {
    y.theta += alpha * x.theta;
    return;
  }
  for (std::size_t j = 0; j < x.a1.size(); ++j) {
    y.a1[j] += alpha * x.a1[j];
    y.a2[j] += alpha * x.a2[j];
  }
}

inline double param_dot(const ParamSet& a, const ParamSet& b) {
  if (a.kind == ModelKind::kLinear) return a.theta.cwiseProduct(b.theta).sum();
  double total = 0.0;
  for (std::size_t j = 0; j < a.a1.size(); ++j) {
    total += a.a1[j].cwiseProduct(b.a1[j]).sum();
    total += a.a2[j].dot(b.a2[j]);
  }
  return total;
}

inline double param_max_abs(const ParamSet& p) {
  if (p.kind == ModelKind::kLinear) return p.d == 0 ? 0.0 : p.theta.cwiseAbs().maxCoeff();
  double m = 0.0;
  for (std::size_t j = 0; j < p.a1.size(); ++j) {
    if (p.a1[j].size() > 0) m = std::max(m, p.a1[j].cwiseAbs().maxCoeff());
    if (p.a2[j].size() > 0) m = std::max(m, p.a2[j].cwiseAbs().maxCoeff());
  }
  return m;
}

// Zeroes every coordinate belonging to an edge i -> j that points backward
// under pi (and the structural zeros).  Output layers are never masked.
inline void mask_to_order(ParamSet& p, const Permutation& pi) {
  const int d = p.d;
  if (p.kind == ModelKind::kLinear) {
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i)
        if (i == j || !pi.before(i, j)) p.theta(i, j) = 0.0;
    return;
  }
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (i == j || !pi.before(i, j)) p.a1[static_cast<std::size_t>(j)].col(i).setZero();
}

}  // namespace toposwap
