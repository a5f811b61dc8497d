#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fluxcast {

using Scalar = double;
using SegmentId = std::uint32_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ArrayX = Eigen::ArrayXd;

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values (bad fractions, empty networks, ...).
class ConfigError : public Error {
  using Error::Error;
};

/// Structurally invalid input to an operation (empty window, empty sequence).
class InputError : public Error {
  using Error::Error;
};

/// Reference to an entity that does not exist (unknown segment id).
class LookupError : public Error {
  using Error::Error;
};

/// Request outside the covered time range or with insufficient history.
class RangeError : public Error {
  using Error::Error;
};

/// Dimension mismatch between containers or matrices.
class ShapeError : public Error {
  using Error::Error;
};

/// Filesystem / stream failures.
class IoError : public Error {
  using Error::Error;
};

/// Numerical failure (non-finite loss, diverged training).
class NumericError : public Error {
  using Error::Error;
};

/// Runs fn(i) for i in [0, n). With jobs > 1 the indices are spread over a
/// small thread pool; results must be written to per-index slots by the
/// caller so the outcome is independent of scheduling. The first exception
/// thrown by any worker is rethrown after all threads joined.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace fluxcast
