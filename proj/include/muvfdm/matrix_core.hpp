#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "common.hpp"

namespace muvfdm {

/// Diagonal 0/1 receive filter selecting the subcarriers of one OFDMA user.
struct SpectralMask {
  Eigen::VectorXi diag;  // length N, entries in {0,1}
  int user_index = 0;    // 1-based
};

/// Banded channel matrix of an (L+1)-tap link acting on one received block of
/// N samples after prefix removal. Row r carries taps(L)..taps(0) in columns
/// r..r+L; shape N x (N+L).
inline ComplexMatrix toeplitz_channel(const ComplexVector& taps, int block_size) {
  require(taps.size() >= 1, "toeplitz_channel: need at least one tap");
  require(block_size >= 1, "toeplitz_channel: block size must be positive");
  const int delay_spread = static_cast<int>(taps.size()) - 1;  // L
  ComplexMatrix out = ComplexMatrix::Zero(block_size, block_size + delay_spread);
  for (int r = 0; r < block_size; ++r)
    for (int k = 0; k <= delay_spread; ++k) out(r, r + k) = taps(delay_spread - k);
  return out;
}

/// Cyclic prefix insertion: top L rows copy the tail of the block, bottom N
/// rows are the block itself. Shape (N+L) x N; requires 0 < L < N.
inline ComplexMatrix cp_insertion_matrix(int block_size, int prefix_len) {
  require(prefix_len > 0 && prefix_len < block_size,
          "cp_insertion_matrix: need 0 < L < N (prefix shorter than the block)");
  const int n = block_size, l = prefix_len;
  ComplexMatrix out = ComplexMatrix::Zero(n + l, n);
  out.topRightCorner(l, l).setIdentity();
  out.bottomRows(n).setIdentity();
  return out;
}

/// Unitary DFT matrix, [F]_{k,l} = exp(-i 2 pi k l / N) / sqrt(N).
inline ComplexMatrix dft_matrix(int n) {
  require(n >= 1, "dft_matrix: size must be positive");
  ComplexMatrix out(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double phase = -2.0 * 3.141592653589793238462643383279502884 *
                           static_cast<double>((static_cast<long long>(k) * l) % n) / n;
      out(k, l) = Complex(scale * std::cos(phase), scale * std::sin(phase));
    }
  return out;
}

/// Uniform partition of N subcarriers into M contiguous per-user blocks.
/// The masks are disjoint and sum to the identity.
inline std::vector<SpectralMask> subcarrier_masks(int n, int user_count) {
  require(user_count >= 1, "subcarrier_masks: need at least one user");
  require(n % user_count == 0, "subcarrier_masks: user count must divide the subcarrier count");
  const int per_user = n / user_count;
  std::vector<SpectralMask> masks(static_cast<std::size_t>(user_count));
  for (int j = 0; j < user_count; ++j) {
    masks[j].diag = Eigen::VectorXi::Zero(n);
    masks[j].diag.segment(j * per_user, per_user).setOnes();
    masks[j].user_index = j + 1;
  }
  return masks;
}

/// Orthonormal basis of the kernel of a wide full-row-rank matrix.
///
/// Computed as the LQ decomposition H = L Q, realized as the Householder QR
/// factorization of H^H: the trailing cols - rows columns of Q span ker(H).
/// Throws DegenerateChannelError when the magnitude of some leading diagonal
/// of the triangular factor falls below 1e-10 * ||H||_F.
inline ComplexMatrix null_space_basis(const ComplexMatrix& h) {
  const Eigen::Index rows = h.rows(), cols = h.cols();
  require(cols > rows, "null_space_basis: matrix must have more columns than rows");
  Eigen::HouseholderQR<ComplexMatrix> qr(h.adjoint());
  const double scale = h.norm();
  const auto& packed = qr.matrixQR();
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rows; ++i) dmin = std::min(dmin, std::abs(packed(i, i)));
  if (!(dmin > 1e-10 * scale))
    throw DegenerateChannelError("degenerate channel: cross-tier block is numerically rank-deficient");
  const Eigen::Index null_dim = cols - rows;
  ComplexMatrix tail = ComplexMatrix::Zero(cols, null_dim);
  tail.bottomRows(null_dim).setIdentity();
  return qr.householderQ() * tail;
}

/// H^H (alpha I + H H^H)^{-1}.
///
/// alpha > 0 goes through a Cholesky solve of the regularized Gram matrix;
/// alpha = 0 demands an invertible H H^H and falls back to the SVD-based
/// right inverse, rejecting condition estimates above 1e12.
inline ComplexMatrix regularized_inverse(const ComplexMatrix& h, double alpha) {
  require(alpha >= 0.0, "regularized_inverse: negative regularization");
  const Eigen::Index r = h.rows();
  if (alpha > 0.0) {
    ComplexMatrix gram = ComplexMatrix::Zero(r, r);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(h);
    gram.diagonal().array() += alpha;
    Eigen::LLT<ComplexMatrix> llt(ComplexMatrix(gram.selfadjointView<Eigen::Lower>()));
    if (llt.info() != Eigen::Success)
      throw SingularSystemError("singular system: regularized Gram matrix not positive definite");
    return llt.solve(h).adjoint();  // (G^{-1} H)^H = H^H G^{-1}
  }
  if (h.cols() < r) throw SingularSystemError("singular system: H H^H cannot be full rank");
  Eigen::BDCSVD<ComplexMatrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || (smax / smin) * (smax / smin) > 1e12)
    throw SingularSystemError("singular system: H H^H condition estimate exceeds 1e12");
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace muvfdm
