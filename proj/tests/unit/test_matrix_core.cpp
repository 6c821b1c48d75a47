#include <muvfdm/matrix_core.hpp>

#include "support.hpp"

using namespace muvfdm;
using Catch::Approx;

namespace {

// Independent oracle: N-point DFT of the zero-padded taps.
ComplexVector dft_of_taps(const ComplexVector& taps, int n) {
  ComplexVector g(n);
  const double pi = 3.141592653589793238462643383279502884;
  for (int sc = 0; sc < n; ++sc) {
    Complex acc(0, 0);
    for (int l = 0; l < taps.size(); ++l)
      acc += taps(l) * std::polar(1.0, -2.0 * pi * sc * l / n);
    g(sc) = acc;
  }
  return g;
}

}  // namespace

TEST_CASE("toeplitz_channel lays taps out reversed along the band") {
  ComplexVector h(2);
  h << Complex(1, 0), Complex(2, 0);
  const ComplexMatrix t = toeplitz_channel(h, 3);
  ComplexMatrix expected(3, 4);
  expected << 2, 1, 0, 0, 0, 2, 1, 0, 0, 0, 2, 1;
  REQUIRE((t - expected).norm() == 0.0);
}

TEST_CASE("toeplitz_channel single-tap delay structure") {
  ComplexVector h(3);
  h << Complex(1, 0), Complex(0, 0), Complex(0, 0);
  const ComplexMatrix t = toeplitz_channel(h, 2);
  ComplexMatrix expected(2, 4);
  expected << 0, 0, 1, 0, 0, 0, 0, 1;
  REQUIRE((t - expected).norm() == 0.0);
}

TEST_CASE("toeplitz_channel banded structure") {
  const int n = 7, spread = 3;
  ComplexVector h = testsupport::random_vector(spread + 1, 11);
  const ComplexMatrix t = toeplitz_channel(h, n);
  REQUIRE(t.rows() == n);
  REQUIRE(t.cols() == n + spread);
  long assigned = 0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n + spread; ++c) {
      if (c >= r && c <= r + spread) {
        ++assigned;
        REQUIRE(t(r, c) == h(spread - (c - r)));
      } else {
        REQUIRE(t(r, c) == Complex(0, 0));
      }
    }
  REQUIRE(assigned == n * (spread + 1));
}

TEST_CASE("cp_insertion_matrix layout and semantics") {
  const ComplexMatrix a = cp_insertion_matrix(4, 2);
  ComplexMatrix expected(6, 4);
  expected << 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  REQUIRE((a - expected).norm() == 0.0);

  // Applying A to a block prepends its last L entries.
  ComplexVector x = testsupport::random_vector(4, 3);
  ComplexVector y = a * x;
  REQUIRE(y(0) == x(2));
  REQUIRE(y(1) == x(3));
  REQUIRE((y.tail(4) - x).norm() == 0.0);

  // Exactly L columns carry the duplicated tail.
  int heavy = 0;
  for (int c = 0; c < 4; ++c) {
    const double nsq = a.col(c).squaredNorm();
    REQUIRE((nsq == 1.0 || nsq == 2.0));
    if (nsq == 2.0) ++heavy;
  }
  REQUIRE(heavy == 2);

  REQUIRE_THROWS_AS(cp_insertion_matrix(4, 4), std::invalid_argument);
  REQUIRE_THROWS_AS(cp_insertion_matrix(4, 0), std::invalid_argument);
}

TEST_CASE("dft_matrix two-point case and first row") {
  const ComplexMatrix f = dft_matrix(2);
  const double s = 1.0 / std::sqrt(2.0);
  REQUIRE(std::abs(f(0, 0) - Complex(s, 0)) < 1e-15);
  REQUIRE(std::abs(f(0, 1) - Complex(s, 0)) < 1e-15);
  REQUIRE(std::abs(f(1, 0) - Complex(s, 0)) < 1e-15);
  REQUIRE(std::abs(f(1, 1) - Complex(-s, 0)) < 1e-15);

  const ComplexMatrix f8 = dft_matrix(8);
  for (int l = 0; l < 8; ++l) REQUIRE(std::abs(f8(0, l) - Complex(1.0 / std::sqrt(8.0), 0)) < 1e-15);
}

TEST_CASE("dft_matrix is unitary for every size up to 256") {
  for (int n = 2; n <= 256; ++n) {
    const ComplexMatrix f = dft_matrix(n);
    const double dev = (f * f.adjoint() - ComplexMatrix::Identity(n, n)).norm();
    REQUIRE(dev <= 1e-12);
  }
}

TEST_CASE("subcarrier_masks form a contiguous disjoint partition") {
  const auto masks = subcarrier_masks(4, 2);
  REQUIRE(masks.size() == 2);
  REQUIRE((masks[0].diag.array() == Eigen::Array4i(1, 1, 0, 0)).all());
  REQUIRE((masks[1].diag.array() == Eigen::Array4i(0, 0, 1, 1)).all());

  const auto single = subcarrier_masks(4, 1);
  REQUIRE(single[0].diag.sum() == 4);

  for (int n : {8, 12, 32}) {
    for (int m : {1, 2, 4}) {
      const auto ms = subcarrier_masks(n, m);
      Eigen::VectorXi sum = Eigen::VectorXi::Zero(n);
      for (const auto& mask : ms) {
        REQUIRE(mask.diag.sum() == n / m);
        sum += mask.diag;
      }
      REQUIRE((sum.array() == 1).all());
      for (std::size_t a = 0; a < ms.size(); ++a)
        for (std::size_t b = a + 1; b < ms.size(); ++b)
          REQUIRE(ms[a].diag.cwiseProduct(ms[b].diag).sum() == 0);
    }
  }
  REQUIRE_THROWS_AS(subcarrier_masks(10, 3), std::invalid_argument);
}

TEST_CASE("null_space_basis on a coordinate kernel") {
  ComplexMatrix h(1, 3);
  h << 1, 0, 0;
  const ComplexMatrix e = null_space_basis(h);
  REQUIRE(e.rows() == 3);
  REQUIRE(e.cols() == 2);
  REQUIRE((h * e).norm() <= 1e-14);
  REQUIRE((e.adjoint() * e - ComplexMatrix::Identity(2, 2)).norm() <= 1e-14);
  // first coordinate absent from the basis
  REQUIRE(e.row(0).norm() <= 1e-14);
}

TEST_CASE("null_space_basis residual and Gram over seeded draws") {
  std::uint64_t seed = 1000;
  for (int n : {8, 16, 32}) {
    for (int spread : {2, 4, 8}) {
      for (int rep = 0; rep < 112; ++rep) {
        const ComplexMatrix h = testsupport::random_matrix(n, n + spread, seed++);
        const ComplexMatrix e = null_space_basis(h);
        REQUIRE(e.rows() == n + spread);
        REQUIRE(e.cols() == spread);
        REQUIRE((h * e).norm() <= 1e-10 * h.norm());
        REQUIRE((e.adjoint() * e - ComplexMatrix::Identity(spread, spread)).norm() <= 1e-12);
      }
    }
  }
}

TEST_CASE("null_space_basis rejects rank-deficient input") {
  ComplexMatrix h = testsupport::random_matrix(4, 7, 77);
  h.row(2) = h.row(0);  // force rank 3
  REQUIRE_THROWS_AS(null_space_basis(h), DegenerateChannelError);
  REQUIRE_THROWS_AS(null_space_basis(testsupport::random_matrix(4, 4, 5)), std::invalid_argument);
}

TEST_CASE("regularized_inverse scalar cases") {
  ComplexMatrix h(1, 1);
  h(0, 0) = 2.0;
  REQUIRE(std::abs(regularized_inverse(h, 0.0)(0, 0) - Complex(0.5, 0)) < 1e-15);
  h(0, 0) = 1.0;
  REQUIRE(std::abs(regularized_inverse(h, 1.0)(0, 0) - Complex(0.5, 0)) < 1e-14);
}

TEST_CASE("regularized_inverse approaches the exact inverse as alpha shrinks") {
  // controlled spectrum in [1, 2] keeps the bound ||H phi - I|| <= sqrt(n) alpha tight
  const int n = 8;
  const ComplexMatrix q1 = testsupport::random_unitary(n, 21);
  const ComplexMatrix q2 = testsupport::random_unitary(n, 22);
  RealVector spectrum = RealVector::LinSpaced(n, 1.0, 2.0);
  const ComplexMatrix h = q1 * spectrum.cast<Complex>().asDiagonal() * q2.adjoint();
  const ComplexMatrix inv = h.inverse();
  for (double alpha : {1e-6, 1e-9}) {
    const ComplexMatrix phi = regularized_inverse(h, alpha);
    REQUIRE((h * phi - ComplexMatrix::Identity(n, n)).norm() <= 10.0 * std::sqrt(double(n)) * alpha);
    REQUIRE((phi - inv).norm() <= 10.0 * std::sqrt(double(n)) * alpha * inv.norm());
  }
}

TEST_CASE("regularized_inverse rejects singular exact inversion") {
  ComplexMatrix h = ComplexMatrix::Zero(2, 2);
  h(0, 0) = 1.0;
  REQUIRE_THROWS_AS(regularized_inverse(h, 0.0), SingularSystemError);
  REQUIRE_THROWS_AS(regularized_inverse(testsupport::random_matrix(3, 2, 9), 0.0), SingularSystemError);
  REQUIRE_THROWS_AS(regularized_inverse(h, -1.0), std::invalid_argument);
}

TEST_CASE("cyclic prefix composition diagonalizes the channel") {
  std::uint64_t seed = 5000;
  for (int n : {16, 32, 64}) {
    const int spread = n / 4;
    const ComplexMatrix f = dft_matrix(n);
    const ComplexMatrix a = cp_insertion_matrix(n, spread);
    for (int rep = 0; rep < 3; ++rep) {
      const ComplexVector taps = testsupport::random_vector(spread + 1, seed++);
      const ComplexMatrix channel = f * toeplitz_channel(taps, n) * a * f.inverse();
      const ComplexMatrix off = channel - ComplexMatrix(channel.diagonal().asDiagonal());
      REQUIRE(off.norm() <= 1e-10 * channel.norm());
      const ComplexVector expected = dft_of_taps(taps, n);
      REQUIRE((channel.diagonal() - expected).norm() <= 1e-10 * expected.norm());
    }
  }
}
