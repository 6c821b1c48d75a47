#pragma once

#include <numeric>
#include <vector>

#include "matrix_core.hpp"

namespace muvfdm {

/// Kernel precoder of one transmit chain: orthonormal basis of
/// ker(H_sm^{(i,.)}), shape (N+L) x L. Anything transmitted through it is
/// invisible to the first tier.
inline ComplexMatrix vfdm_inner(const ComplexMatrix& cross_block) {
  return null_space_basis(cross_block);
}

/// Block-diagonal direct sum of a list of matrices.
inline ComplexMatrix direct_sum(const std::vector<ComplexMatrix>& blocks) {
  require(!blocks.empty(), "direct_sum: empty block list");
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  ComplexMatrix out = ComplexMatrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

/// Per-chain kernel precoders plus their direct sum, kept in block form so
/// large products can exploit the block-diagonal structure.
struct InnerPrecoder {
  std::vector<ComplexMatrix> blocks;  // each (N+L) x L, orthonormal columns

  Eigen::Index rows() const {
    return std::accumulate(blocks.begin(), blocks.end(), Eigen::Index{0},
                           [](Eigen::Index a, const ComplexMatrix& b) { return a + b.rows(); });
  }
  Eigen::Index cols() const {
    return std::accumulate(blocks.begin(), blocks.end(), Eigen::Index{0},
                           [](Eigen::Index a, const ComplexMatrix& b) { return a + b.cols(); });
  }
  ComplexMatrix dense() const { return direct_sum(blocks); }

  /// E * phi without materializing the dense E.
  ComplexMatrix apply_left(const ComplexMatrix& phi) const {
    require(cols() == phi.rows(), "InnerPrecoder::apply_left: dimension mismatch");
    ComplexMatrix out(rows(), phi.cols());
    Eigen::Index r = 0, c = 0;
    for (const auto& b : blocks) {
      out.middleRows(r, b.rows()).noalias() = b * phi.middleRows(c, b.cols());
      r += b.rows();
      c += b.cols();
    }
    return out;
  }
};

inline InnerPrecoder build_inner_precoder(const std::vector<ComplexMatrix>& cross_blocks) {
  InnerPrecoder inner;
  inner.blocks.reserve(cross_blocks.size());
  for (const auto& h : cross_blocks) inner.blocks.push_back(vfdm_inner(h));
  return inner;
}

/// Effective second-tier channel H_bar = H_ss E.
inline ComplexMatrix effective_channel(const ComplexMatrix& h_ss, const ComplexMatrix& e) {
  require(h_ss.cols() == e.rows(), "effective_channel: dimension mismatch");
  return h_ss * e;
}

/// Block-aware overload: multiplies against the per-chain column blocks.
inline ComplexMatrix effective_channel(const ComplexMatrix& h_ss, const InnerPrecoder& inner) {
  require(h_ss.cols() == inner.rows(), "effective_channel: dimension mismatch");
  ComplexMatrix out(h_ss.rows(), inner.cols());
  Eigen::Index src = 0, dst = 0;
  for (const auto& b : inner.blocks) {
    out.middleCols(dst, b.cols()).noalias() = h_ss.middleCols(src, b.rows()) * b;
    src += b.rows();
    dst += b.cols();
  }
  return out;
}

/// Joint RIBF outer precoder Phi = H_bar^H ((sigma^2/P_s) I + H_bar H_bar^H)^{-1}.
/// Requires at least as many transmit as receive dimensions (load rate >= 1).
inline ComplexMatrix ribf_outer(const ComplexMatrix& h_bar, double noise_over_power) {
  if (h_bar.cols() < h_bar.rows())
    throw std::invalid_argument("insufficient transmit dimensions: RIBF needs gamma_tx*L >= gamma_rx*N");
  require(noise_over_power > 0.0, "ribf_outer: noise-to-power ratio must be positive");
  return regularized_inverse(h_bar, noise_over_power);
}

/// Matched-filter outer precoder, Phi = H_bar^H.
inline ComplexMatrix mf_outer(const ComplexMatrix& h_bar) { return h_bar.adjoint(); }

/// Trace-normalized cascade. `phi` is stored already divided by norm_factor,
/// so W = E * phi holds exactly and tr(W^H W) = 1.
struct CascadedPrecoder {
  ComplexMatrix phi;   // outer stage of the normalized cascade
  ComplexMatrix W;     // E * phi
  double norm_factor;  // sqrt(tr(E phi_raw phi_raw^H E^H)) of the raw outer input
};

namespace detail {

inline CascadedPrecoder normalize_cascade_from(ComplexMatrix&& w_raw, const ComplexMatrix& phi_raw) {
  const double nf = w_raw.norm();
  if (!(nf > 0.0) || !std::isfinite(nf))
    throw DegeneratePrecoderError("degenerate precoder: cascade has zero power");
  CascadedPrecoder out;
  out.norm_factor = nf;
  out.phi = phi_raw / nf;
  out.W = std::move(w_raw);
  out.W /= nf;
  return out;
}

}  // namespace detail

inline CascadedPrecoder normalize_cascade(const ComplexMatrix& e, const ComplexMatrix& phi_raw) {
  require(e.cols() == phi_raw.rows(), "normalize_cascade: dimension mismatch");
  return detail::normalize_cascade_from(e * phi_raw, phi_raw);
}

inline CascadedPrecoder normalize_cascade(const InnerPrecoder& inner, const ComplexMatrix& phi_raw) {
  return detail::normalize_cascade_from(inner.apply_left(phi_raw), phi_raw);
}

/// Transmit-to-receive dimension ratio of the second tier, kept as an exact
/// fraction gamma_tx*L / (gamma_rx*N).
struct LoadRate {
  int gamma_tx = 1;
  int gamma_rx = 1;
  long long num = 0;  // reduced numerator
  long long den = 1;  // reduced denominator

  static LoadRate of(int gamma_tx, int gamma_rx, int block_size, int prefix_len) {
    require(gamma_tx >= 1 && gamma_rx >= 1, "LoadRate: dimension multipliers must be positive");
    long long num = static_cast<long long>(gamma_tx) * prefix_len;
    long long den = static_cast<long long>(gamma_rx) * block_size;
    const long long g = std::gcd(num, den);
    return {gamma_tx, gamma_rx, num / g, den / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  /// RIBF feasibility condition gamma_tx*L >= gamma_rx*N.
  bool ribf_feasible() const { return num >= den; }
};

}  // namespace muvfdm
