#pragma once

#include <catch2/catch_amalgamated.hpp>

#include <muvfdm/random_stream.hpp>

#include <Eigen/Dense>
#include <complex>

namespace testsupport {

inline Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  muvfdm::RandomStream rng(muvfdm::detail::mix64(seed));
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.next_cgauss(1.0);
  return m;
}

inline Eigen::VectorXcd random_vector(Eigen::Index n, std::uint64_t seed) {
  muvfdm::RandomStream rng(muvfdm::detail::mix64(seed ^ 0x5bd1e995));
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.next_cgauss(1.0);
  return v;
}

/// Unitary factor of a seeded random matrix; used to build matrices with a
/// prescribed spectrum.
inline Eigen::MatrixXcd random_unitary(Eigen::Index n, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_matrix(n, n, seed));
  return qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
}

}  // namespace testsupport
