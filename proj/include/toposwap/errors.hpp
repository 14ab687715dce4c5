#pragma once

#include <stdexcept>
#include <string>

namespace toposwap {

// Base type for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A weight matrix whose support contains a directed cycle was handed to an
// operation that needs a DAG.
struct CyclicGraphError : Error {
  using Error::Error;
};

struct DimensionMismatchError : Error {
  using Error::Error;
};

// Negative entry in a matrix that must be entrywise nonnegative.
struct NegativeEntryError : Error {
  using Error::Error;
};

// The log-det acyclicity function is only defined while I - B stays an
// M-matrix (spectral radius of B below one).
struct SpectralRadiusError : Error {
  using Error::Error;
};

// Gaussian NLL hit a residual with squared norm below the representable
// floor; taking its log would be meaningless.
struct ZeroResidualError : Error {
  using Error::Error;
};

// Logistic score requires strictly 0/1 observations.
struct NonBinaryDataError : Error {
  using Error::Error;
};

// Population score needs an invertible I - W_true.
struct SingularTruthError : Error {
  using Error::Error;
};

struct NotADagError : Error {
  using Error::Error;
};

// Exhaustive enumeration refused: factorial blow-up past the supported size.
struct TooLargeError : Error {
  using Error::Error;
};

// An opt-2 probe produced a cyclic support, i.e. the pair was not actually
// insertable (violated precondition).
struct CyclicProbeError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace toposwap
