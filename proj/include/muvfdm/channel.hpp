#pragma once

#include <vector>

#include "matrix_core.hpp"
#include "random_stream.hpp"

namespace muvfdm {

/// Which tier a link endpoint belongs to.
enum class Station : char { Macro = 'm', Small = 's' };

struct LinkLabel {
  Station from = Station::Macro;
  int from_index = 1;
  Station to = Station::Macro;
  int to_index = 1;
};

/// Impulse response of one link: L+1 i.i.d. CN(0, 1/(L+1)) taps, so the
/// total expected power is 1.
struct ChannelTaps {
  ComplexVector taps;
  LinkLabel label;
};

inline ChannelTaps draw_taps(RandomStream& rng, int delay_spread, LinkLabel label = {}) {
  require(delay_spread >= 0, "draw_taps: negative delay spread");
  const int n = delay_spread + 1;
  ChannelTaps out;
  out.taps.resize(n);
  const double per_tap_variance = 1.0 / n;
  for (int i = 0; i < n; ++i) out.taps(i) = rng.next_cgauss(per_tap_variance);
  out.label = label;
  return out;
}

/// N-point frequency response of zero-padded taps: g(n) = sum_l h(l) e^{-i 2 pi n l / N}.
inline ComplexVector frequency_response(const ComplexVector& taps, int n) {
  ComplexVector g = ComplexVector::Zero(n);
  for (int sc = 0; sc < n; ++sc) {
    Complex acc(0, 0);
    for (int l = 0; l < taps.size(); ++l) {
      const double phase = -2.0 * 3.141592653589793238462643383279502884 *
                           static_cast<double>((static_cast<long long>(sc) * l) % n) / n;
      acc += taps(l) * Complex(std::cos(phase), std::sin(phase));
    }
    g(sc) = acc;
  }
  return g;
}

namespace detail {

/// Rows of F * T(h) restricted to one user's mask, accumulated into `out`.
/// Exploits the (L+1)-banded structure of T instead of a dense product.
inline void add_masked_freq_toeplitz(ComplexMatrix& out, const ComplexMatrix& dft, const ComplexVector& taps,
                                     const Eigen::VectorXi& mask_diag) {
  const int n = static_cast<int>(dft.rows());
  const int delay_spread = static_cast<int>(taps.size()) - 1;
  for (int row = 0; row < n; ++row) {
    if (mask_diag(row) == 0) continue;
    for (int c = 0; c < n + delay_spread; ++c) {
      Complex acc(0, 0);
      const int r_lo = std::max(0, c - delay_spread), r_hi = std::min(n - 1, c);
      for (int r = r_lo; r <= r_hi; ++r) acc += dft(row, r) * taps(delay_spread - (c - r));
      out(row, c) += acc;
    }
  }
}

}  // namespace detail

/// Equivalent frequency-domain channel from the MBS to its M OFDMA users:
/// H_mm = sum_j B_j F T(h_mm^{(1,j)}) A F^{-1}. Diagonal up to roundoff, with
/// diagonal entry n equal to the owning user's frequency response at n.
inline ComplexMatrix build_macro_channel(const std::vector<ChannelTaps>& taps_per_mue,
                                         const std::vector<SpectralMask>& masks, int n, int delay_spread) {
  require(taps_per_mue.size() == masks.size(), "build_macro_channel: one taps vector per mask required");
  const ComplexMatrix dft = dft_matrix(n);
  const ComplexMatrix cp = cp_insertion_matrix(n, delay_spread);
  ComplexMatrix masked = ComplexMatrix::Zero(n, n + delay_spread);
  for (std::size_t j = 0; j < masks.size(); ++j) {
    require(taps_per_mue[j].taps.size() == delay_spread + 1, "build_macro_channel: taps length mismatch");
    detail::add_masked_freq_toeplitz(masked, dft, taps_per_mue[j].taps, masks[j].diag);
  }
  ComplexMatrix folded;
  folded.noalias() = masked * cp;        // N x N time-domain circulant
  return folded * dft.adjoint();         // F ... F^{-1}, F unitary
}

/// One transmit chain's aggregated interference block towards the MUEs:
/// H_sm^{(i,.)} = sum_j B_j F T(h_sm^{(i,j)}), shape N x (N+L).
inline ComplexMatrix build_cross_channel_block(const std::vector<ChannelTaps>& taps_per_mue,
                                               const std::vector<SpectralMask>& masks, int n, int delay_spread) {
  require(taps_per_mue.size() == masks.size(), "build_cross_channel_block: one taps vector per mask required");
  const ComplexMatrix dft = dft_matrix(n);
  ComplexMatrix out = ComplexMatrix::Zero(n, n + delay_spread);
  for (std::size_t j = 0; j < masks.size(); ++j) {
    require(taps_per_mue[j].taps.size() == delay_spread + 1, "build_cross_channel_block: taps length mismatch");
    detail::add_masked_freq_toeplitz(out, dft, taps_per_mue[j].taps, masks[j].diag);
  }
  return out;
}

/// Aggregated second-tier channel: blockwise H_ss[(k,i)] = F T(h_ss^{(i,k)})
/// stacked over the K receiving SUEs (rows) and the K*gamma_tx transmit
/// chains (columns). Shape KN x K*gamma_tx*(N+L).
inline ComplexMatrix build_small_cell_channel(const std::vector<std::vector<ChannelTaps>>& taps_chain_to_sue,
                                              int n, int delay_spread, int sue_count) {
  const int chains = static_cast<int>(taps_chain_to_sue.size());
  require(chains >= 1, "build_small_cell_channel: need at least one transmit chain");
  const ComplexMatrix dft = dft_matrix(n);
  const Eigen::VectorXi all_rows = Eigen::VectorXi::Ones(n);
  ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(sue_count) * n,
                                          static_cast<Eigen::Index>(chains) * (n + delay_spread));
  for (int i = 0; i < chains; ++i) {
    require(static_cast<int>(taps_chain_to_sue[i].size()) == sue_count,
            "build_small_cell_channel: incomplete taps grid");
    for (int k = 0; k < sue_count; ++k) {
      ComplexMatrix block = ComplexMatrix::Zero(n, n + delay_spread);
      detail::add_masked_freq_toeplitz(block, dft, taps_chain_to_sue[i][k].taps, all_rows);
      out.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(i) * (n + delay_spread), n,
                n + delay_spread) = block;
    }
  }
  return out;
}

/// Interfering link from the MBS to the K SUEs: block k is
/// F T(h_ms^{(1,k)}) A F^{-1} (diagonal up to roundoff). Shape KN x N.
inline ComplexMatrix build_mbs_to_sue_channel(const std::vector<ChannelTaps>& taps_per_sue, int n,
                                              int delay_spread) {
  const int k_count = static_cast<int>(taps_per_sue.size());
  require(k_count >= 1, "build_mbs_to_sue_channel: need at least one SUE");
  const ComplexMatrix dft = dft_matrix(n);
  const ComplexMatrix cp = cp_insertion_matrix(n, delay_spread);
  const Eigen::VectorXi all_rows = Eigen::VectorXi::Ones(n);
  ComplexMatrix out(static_cast<Eigen::Index>(k_count) * n, n);
  for (int k = 0; k < k_count; ++k) {
    ComplexMatrix masked = ComplexMatrix::Zero(n, n + delay_spread);
    detail::add_masked_freq_toeplitz(masked, dft, taps_per_sue[k].taps, all_rows);
    ComplexMatrix folded;
    folded.noalias() = masked * cp;
    out.middleRows(static_cast<Eigen::Index>(k) * n, n).noalias() = folded * dft.adjoint();
  }
  return out;
}

/// The four frequency/time-domain system matrices of one realization.
struct AggregateChannels {
  ComplexMatrix H_mm;                    // N x N
  std::vector<ComplexMatrix> H_sm_blocks;  // K*gamma_tx blocks, N x (N+L)
  ComplexMatrix H_sm;                    // N x K*gamma_tx*(N+L), blocks concatenated in chain order
  ComplexMatrix H_ss;                    // KN x K*gamma_tx*(N+L)
  ComplexMatrix H_ms;                    // KN x N (empty when not built)
};

/// MMSE tap estimation from the pilot observation r = sqrt(rho tau) h + n.
///
/// With per-tap prior variance s = 1/(L+1) and noise variance sigma2 the
/// estimate is h_hat = a h + b n0 (n0 standard complex Gaussian), where the
/// weights below follow from the per-tap scalar MMSE filter.
struct MmseWeights {
  double signal;          // a
  double noise;           // b, applied to a unit-variance noise draw
  double error_variance;  // per-tap variance of h - h_hat
};

inline MmseWeights mmse_weights(double rho, double tau, double sigma2, int delay_spread) {
  require(rho > 0.0 && tau > 0.0 && sigma2 > 0.0, "mmse_weights: rho, tau, sigma2 must be positive");
  const double prior = 1.0 / (delay_spread + 1);
  const double denom = rho * tau * prior + sigma2;
  return {rho * tau * prior / denom, std::sqrt(rho * tau) * prior * std::sqrt(sigma2) / denom,
          prior * sigma2 / denom};
}

struct CsitEstimate {
  ChannelTaps h_hat;
  double error_variance = 0.0;
};

inline CsitEstimate estimate_csit(const ChannelTaps& h, double rho, double tau, double sigma2,
                                  RandomStream& rng) {
  const int delay_spread = static_cast<int>(h.taps.size()) - 1;
  const MmseWeights w = mmse_weights(rho, tau, sigma2, delay_spread);
  CsitEstimate out;
  out.h_hat.label = h.label;
  out.h_hat.taps.resize(h.taps.size());
  for (Eigen::Index i = 0; i < h.taps.size(); ++i)
    out.h_hat.taps(i) = w.signal * h.taps(i) + w.noise * rng.next_cgauss(1.0);
  out.error_variance = w.error_variance;
  return out;
}

}  // namespace muvfdm
