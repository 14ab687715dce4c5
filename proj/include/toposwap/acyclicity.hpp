#pragma once

// Smooth acyclicity functions over nonnegative matrices.  Each h is zero
// exactly on supports that are DAGs and positive otherwise, and the (i, j)
// entry of its gradient is positive exactly when the graph contains a
// directed walk from j to i.  That walk characterization is what the swap
// search keys on.

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

#include "toposwap/errors.hpp"
#include "toposwap/graph.hpp"

namespace toposwap {

enum class AcyclicityKind { kExpTrace, kPolynomial, kLogDet };

inline std::string to_string(AcyclicityKind kind) {
  switch (kind) {
    case AcyclicityKind::kExpTrace: return "expm";
    case AcyclicityKind::kPolynomial: return "poly";
    case AcyclicityKind::kLogDet: return "logdet";
  }
  return "?";
}

inline AcyclicityKind acyclicity_from_string(const std::string& name) {
  if (name == "expm") return AcyclicityKind::kExpTrace;
  if (name == "poly") return AcyclicityKind::kPolynomial;
  if (name == "logdet") return AcyclicityKind::kLogDet;
  throw ConfigError("unknown acyclicity function: " + name);
}

// Gradient entries at or below this are treated as exact zeros when the
// search partitions pairs into walk / no-walk.  Matrix exponentials and LU
// solves smear ~1e-16 garbage into entries that are zero in exact
// arithmetic; genuine walk weights in fitted models sit many orders above.
inline constexpr double kWalkZeroTol = 1e-12;

namespace detail {

inline void check_nonnegative_square(const Matrix& b, const char* who) {
  if (b.rows() != b.cols()) throw DimensionMismatchError(std::string(who) + ": matrix must be square");
  if ((b.array() < 0.0).any()) throw NegativeEntryError(std::string(who) + ": negative entry");
}

// (I + B/d)^p by repeated squaring.
inline Matrix poly_power(const Matrix& b, int p) {
  const auto d = b.rows();
  Matrix base = Matrix::Identity(d, d) + b / static_cast<double>(d);
  Matrix result = Matrix::Identity(d, d);
  while (p > 0) {
    if (p & 1) result = result * base;
    base = base * base;
    p >>= 1;
  }
  return result;
}

// Doolittle LU of I - B without pivoting.  For a nonnegative B with spectral
// radius below one, I - B is an M-matrix, the factorization exists and every
// pivot is positive; a nonpositive pivot certifies the domain violation.
// Returns the pivots; h = -sum(log pivot) since det = prod(pivots).
inline Vector m_matrix_pivots(const Matrix& b) {
  const auto d = b.rows();
  Matrix a = Matrix::Identity(d, d) - b;
  Vector pivots(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double pivot = a(k, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot))
      throw SpectralRadiusError("logdet acyclicity: I - B is not an M-matrix (spectral radius >= 1)");
    pivots(k) = pivot;
    for (Eigen::Index i = k + 1; i < d; ++i) {
      const double factor = a(i, k) / pivot;
      if (factor != 0.0) a.row(i).tail(d - k - 1) -= factor * a.row(k).tail(d - k - 1);
    }
  }
  return pivots;
}

}  // namespace detail

inline double h_value(AcyclicityKind kind, const Matrix& b) {
  detail::check_nonnegative_square(b, "h_value");
  const auto d = b.rows();
  double value = 0.0;
  switch (kind) {
    case AcyclicityKind::kExpTrace:
      value = b.exp().trace() - static_cast<double>(d);
      break;
    case AcyclicityKind::kPolynomial:
      value = detail::poly_power(b, static_cast<int>(d)).trace() - static_cast<double>(d);
      break;
    case AcyclicityKind::kLogDet: {
      value = -detail::m_matrix_pivots(b).array().log().sum();
      break;
    }
  }
  // All three are nonnegative on their domain; rounding can leave a tiny
  // negative residue on exact DAGs.
  return value < 0.0 ? 0.0 : value;
}

inline Matrix h_grad(AcyclicityKind kind, const Matrix& b) {
  detail::check_nonnegative_square(b, "h_grad");
  const auto d = b.rows();
  switch (kind) {
    case AcyclicityKind::kExpTrace:
      return b.exp().transpose();
    case AcyclicityKind::kPolynomial:
      return detail::poly_power(b, static_cast<int>(d) - 1).transpose();
    case AcyclicityKind::kLogDet: {
      detail::m_matrix_pivots(b);  // domain guard
      Matrix a = Matrix::Identity(d, d) - b;
      return a.partialPivLu().inverse().transpose();
    }
  }
  return Matrix();
}

}  // namespace toposwap
