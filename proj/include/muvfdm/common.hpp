#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace muvfdm {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// A random channel draw turned out rank-deficient (probability-zero event
/// under the fading model). Callers resample the trial instead of patching
/// the factorization.
struct DegenerateChannelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An exact inverse was requested for a numerically singular system.
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The cascade collapsed to zero power and cannot be trace-normalized.
struct DegeneratePrecoderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad scenario file / CLI arguments.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& what) {
  if (!condition) throw std::invalid_argument(what);
}

}  // namespace muvfdm
