#pragma once

#include <cmath>
#include <vector>

#include "channel.hpp"
#include "precoder.hpp"

namespace muvfdm {

/// Per-symbol transmit powers of the two tiers and the noise floor. The
/// total transmit power per tier is the same: P_s = P_m / K.
struct PowerProfile {
  double mbs_power = 1.0;       // P_m
  double sbs_power = 1.0;       // P_s
  double noise_variance = 1.0;  // sigma^2
  double snr_db = 0.0;          // 10 log10(P_m / sigma^2)

  static PowerProfile from_snr_db(double snr_db, int sbs_count) {
    require(sbs_count >= 1, "PowerProfile: need at least one SBS");
    PowerProfile p;
    p.mbs_power = 1.0;
    p.sbs_power = 1.0 / sbs_count;
    p.noise_variance = std::pow(10.0, -snr_db / 10.0);
    p.snr_db = snr_db;
    return p;
  }
};

/// Block-fading coherence horizon and the slice of it spent on pilots.
struct TrainingBudget {
  double coherence_symbols = 1000.0;  // T
  double training_symbols = 100.0;    // tau, 0 < tau <= T

  double fraction() const { return training_symbols / coherence_symbols; }
  double prelog() const { return (coherence_symbols - training_symbols) / coherence_symbols; }
};

struct RatePair {
  double macro_bps = 0.0;
  double small_bps = 0.0;
  double total() const { return macro_bps + small_bps; }
};

/// Sum-rate upper bound of the cooperating second tier under uniform power:
/// B/(N+L) log2 det(I + (N+L) P_s / (sigma^2 L gamma_tx) H_bar H_bar^H)
/// for one channel realization. The ergodic value is the trial mean.
inline double dpc_sum_rate(const ComplexMatrix& h_bar, const PowerProfile& p, double bandwidth, int n,
                           int prefix_len, int gamma_tx) {
  const Eigen::Index kn = h_bar.rows();
  const double scale = (n + prefix_len) * p.sbs_power / (p.noise_variance * prefix_len * gamma_tx);
  ComplexMatrix m = ComplexMatrix::Zero(kn, kn);
  m.selfadjointView<Eigen::Lower>().rankUpdate(h_bar, scale);
  m.diagonal().array() += 1.0;
  Eigen::LLT<ComplexMatrix> llt(ComplexMatrix(m.selfadjointView<Eigen::Lower>()));
  double log2det = 0.0;
  for (Eigen::Index i = 0; i < kn; ++i) log2det += 2.0 * std::log2(std::abs(llt.matrixLLT()(i, i)));
  return bandwidth / (n + prefix_len) * log2det;
}

/// Per-symbol SINRs from the precomputed product G = H_bar * phi. The noise
/// term is trace_wwh * sigma^2 / (P_s K (N+L)); `extra_interference`, when
/// given, adds a per-symbol term in the same normalized units (the
/// MBS-to-SUE interference mode).
inline RealVector sue_sinrs_from_product(const ComplexMatrix& g, double trace_wwh, const PowerProfile& p,
                                         int n, int prefix_len, int sbs_count,
                                         const RealVector* extra_interference = nullptr) {
  const Eigen::Index kn = g.rows();
  require(g.cols() == kn, "sue_sinrs_from_product: product must be square (KN x KN)");
  const double noise = trace_wwh * p.noise_variance / (p.sbs_power * sbs_count * (n + prefix_len));
  RealVector out(kn);
  for (Eigen::Index j = 0; j < kn; ++j) {
    const double direct = std::norm(g(j, j));
    double denom = (g.row(j).squaredNorm() - direct) + noise;
    if (extra_interference) denom += (*extra_interference)(j);
    out(j) = direct / denom;
  }
  return out;
}

/// SINR of each of the KN received second-tier symbols under perfect CSIT:
/// |h_bar_j phi_j|^2 / (sum_{i != j} |h_bar_j phi_i|^2 + tr(W W^H) sigma^2 / (P_s K (N+L))).
inline RealVector sue_sinr_perfect(const ComplexMatrix& h_bar, const ComplexMatrix& phi,
                                   const ComplexMatrix& w, const PowerProfile& p, int n, int prefix_len,
                                   int sbs_count) {
  require(h_bar.cols() == phi.rows(), "sue_sinr_perfect: dimension mismatch");
  ComplexMatrix g;
  g.noalias() = h_bar * phi;
  return sue_sinrs_from_product(g, w.squaredNorm(), p, n, prefix_len, sbs_count);
}

/// B/(N+L) sum_j log2(1 + SINR_j).
inline double ribf_sum_rate(const RealVector& sinrs, double bandwidth, int n, int prefix_len) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < sinrs.size(); ++j) acc += std::log2(1.0 + sinrs(j));
  return bandwidth / (n + prefix_len) * acc;
}

/// SINR per received MUE symbol when the second tier precodes on estimated
/// channels: P_m K |h_mm^{(j)}|^2 / (||row_j(H_sm cascade)||^2 + sigma^2),
/// with |h_mm^{(j)}|^2 the squared norm of row j of H_mm. `cascade` is the
/// trace-normalized cascade built at the SBSs; H_sm is the true cross-tier
/// channel, so the interference term is exactly what the estimation error
/// leaks through the null precoder.
inline RealVector mue_sinr_imperfect(const ComplexMatrix& h_mm, const ComplexMatrix& h_sm,
                                     const ComplexMatrix& cascade, const PowerProfile& p, int sbs_count) {
  require(h_sm.cols() == cascade.rows(), "mue_sinr_imperfect: dimension mismatch");
  ComplexMatrix leak;
  leak.noalias() = h_sm * cascade;  // N x KN
  RealVector out(h_mm.rows());
  for (Eigen::Index j = 0; j < h_mm.rows(); ++j)
    out(j) = p.mbs_power * sbs_count * h_mm.row(j).squaredNorm() /
             (leak.row(j).squaredNorm() + p.noise_variance);
  return out;
}

/// Effective per-symbol SINR pricing the channel-estimation penalty at the
/// receiver: X^2 tau / (1 + (1 + tau) X), tau in symbols. Strictly below X
/// for any finite tau.
inline double sue_effective_sinr(double inner_sinr, double tau_symbols) {
  require(inner_sinr >= 0.0, "sue_effective_sinr: negative SINR");
  require(tau_symbols > 0.0, "sue_effective_sinr: tau must be positive");
  return inner_sinr * inner_sinr * tau_symbols / (1.0 + (1.0 + tau_symbols) * inner_sinr);
}

/// Training-overhead sum-rates of both tiers:
/// B (T - tau) / (T (N+L)) * sum log2(1 + SINR) over the N macro and KN
/// small-cell symbols respectively.
inline RatePair sum_rates_imperfect(const RealVector& mue_sinrs, const RealVector& sue_eff_sinrs,
                                    const TrainingBudget& budget, int n, int prefix_len, int sbs_count,
                                    double bandwidth) {
  require(budget.training_symbols > 0.0 && budget.training_symbols <= budget.coherence_symbols,
          "sum_rates_imperfect: need 0 < tau <= T");
  require(mue_sinrs.size() == n, "sum_rates_imperfect: expected N macro SINRs");
  require(sue_eff_sinrs.size() == static_cast<Eigen::Index>(sbs_count) * n,
          "sum_rates_imperfect: expected KN small-cell SINRs");
  const double prefactor = bandwidth * budget.prelog() / (n + prefix_len);
  double macro = 0.0, small = 0.0;
  for (Eigen::Index j = 0; j < mue_sinrs.size(); ++j) macro += std::log2(1.0 + mue_sinrs(j));
  for (Eigen::Index j = 0; j < sue_eff_sinrs.size(); ++j) small += std::log2(1.0 + sue_eff_sinrs(j));
  return {prefactor * macro, prefactor * small};
}

/// Per-subcarrier view of the same physical links, used by the complete
/// bandwidth-separation baseline.
struct SeparationChannel {
  ComplexVector macro_gains;               // N entries: owning MUE's response per subcarrier
  std::vector<ComplexMatrix> small_gains;  // N matrices, K x (K*gamma_tx)
};

inline SeparationChannel build_separation_channel(const std::vector<ChannelTaps>& taps_per_mue,
                                                  const std::vector<SpectralMask>& masks,
                                                  const std::vector<std::vector<ChannelTaps>>& taps_chain_to_sue,
                                                  int n, int sue_count) {
  SeparationChannel out;
  out.macro_gains.resize(n);
  require(taps_per_mue.size() == masks.size(), "build_separation_channel: one taps vector per mask");
  for (std::size_t j = 0; j < masks.size(); ++j) {
    const ComplexVector g = frequency_response(taps_per_mue[j].taps, n);
    for (int sc = 0; sc < n; ++sc)
      if (masks[j].diag(sc)) out.macro_gains(sc) = g(sc);
  }
  const int chains = static_cast<int>(taps_chain_to_sue.size());
  out.small_gains.assign(n, ComplexMatrix::Zero(sue_count, chains));
  for (int i = 0; i < chains; ++i) {
    require(static_cast<int>(taps_chain_to_sue[i].size()) == sue_count,
            "build_separation_channel: incomplete taps grid");
    for (int k = 0; k < sue_count; ++k) {
      const ComplexVector g = frequency_response(taps_chain_to_sue[i][k].taps, n);
      for (int sc = 0; sc < n; ++sc) out.small_gains[sc](k, i) = g(sc);
    }
  }
  return out;
}

namespace detail {

/// Per-subcarrier ZF stage of the separation baseline. Returns the K
/// per-stream SINRs at subcarrier `sc` when the precoder is derived from
/// `est` and the signal propagates over `truth`. Noise term mirrors the
/// trace-normalized convention with the block power budget split evenly
/// across the N subcarriers.
inline RealVector separation_subcarrier_sinrs(const ComplexMatrix& truth, const ComplexMatrix& est,
                                              const PowerProfile& p, int n, int prefix_len, int sbs_count) {
  ComplexMatrix phi = regularized_inverse(est, 0.0);  // ZF right inverse
  const double nf = phi.norm();
  if (!(nf > 0.0) || !std::isfinite(nf))
    throw DegeneratePrecoderError("degenerate precoder: separation ZF collapsed");
  ComplexMatrix g;
  g.noalias() = truth * phi;
  g /= nf;
  const double noise = static_cast<double>(n) * p.noise_variance /
                       (p.sbs_power * sbs_count * (n + prefix_len));
  RealVector out(g.rows());
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    const double direct = std::norm(g(k, k));
    out(k) = direct / ((g.row(k).squaredNorm() - direct) + noise);
  }
  return out;
}

}  // namespace detail

/// Complete bandwidth separation under perfect CSIT: the MBS keeps
/// B_m = B (1 - L/N) for legacy interference-free OFDMA, the SBSs run
/// network MIMO-OFDMA with per-subcarrier ZF over B_s = B L / N. The split
/// keeps the per-antenna symbol rate equal to the sharing scheme's.
inline RatePair complete_separation_rates(const SeparationChannel& ch, const PowerProfile& p,
                                          double bandwidth, int n, int prefix_len, int sbs_count) {
  const double band_small = bandwidth * prefix_len / n;
  const double band_macro = bandwidth - band_small;
  double macro = 0.0;
  for (int sc = 0; sc < n; ++sc)
    macro += std::log2(1.0 + p.mbs_power * std::norm(ch.macro_gains(sc)) / p.noise_variance);
  macro *= band_macro / (n + prefix_len);
  double small = 0.0;
  for (int sc = 0; sc < n; ++sc) {
    const RealVector sinrs =
        detail::separation_subcarrier_sinrs(ch.small_gains[sc], ch.small_gains[sc], p, n, prefix_len, sbs_count);
    for (Eigen::Index k = 0; k < sinrs.size(); ++k) small += std::log2(1.0 + sinrs(k));
  }
  small *= band_small / (n + prefix_len);
  return {macro, small};
}

/// Separation baseline under imperfect CSIT: the ZF stage is derived from
/// the estimated responses, the per-stream SINR is evaluated on the true
/// ones and priced by the effective-SINR training penalty; both tiers pay
/// the (T - tau)/T pre-log.
inline RatePair complete_separation_rates_imperfect(const SeparationChannel& truth,
                                                    const SeparationChannel& est, const PowerProfile& p,
                                                    double bandwidth, int n, int prefix_len, int sbs_count,
                                                    const TrainingBudget& budget) {
  const double band_small = bandwidth * prefix_len / n;
  const double band_macro = bandwidth - band_small;
  const double prelog = budget.prelog();
  double macro = 0.0;
  for (int sc = 0; sc < n; ++sc)
    macro += std::log2(1.0 + p.mbs_power * std::norm(truth.macro_gains(sc)) / p.noise_variance);
  macro *= prelog * band_macro / (n + prefix_len);
  double small = 0.0;
  for (int sc = 0; sc < n; ++sc) {
    const RealVector sinrs =
        detail::separation_subcarrier_sinrs(truth.small_gains[sc], est.small_gains[sc], p, n, prefix_len, sbs_count);
    for (Eigen::Index k = 0; k < sinrs.size(); ++k)
      small += std::log2(1.0 + sue_effective_sinr(sinrs(k), budget.training_symbols));
  }
  small *= prelog * band_small / (n + prefix_len);
  return {macro, small};
}

struct SignalPathReport {
  double relative_residual = 0.0;  // ||y_m - H_mm s_m|| / ||H_mm s_m||, noise off
};

/// Materializes the transmit/receive signal path once: random unit-norm
/// symbol vectors are sent through the cascade and the received macro vector
/// is compared against the interference-free one. Under perfect CSIT the
/// relative residual is the null-space leakage of the cascade.
inline SignalPathReport signal_path_check(const AggregateChannels& ch, const ComplexMatrix& w,
                                          RandomStream& rng) {
  const Eigen::Index n = ch.H_mm.rows(), kn = w.cols();
  ComplexVector s_m(n), u_s(kn);
  for (Eigen::Index i = 0; i < n; ++i) s_m(i) = rng.next_cgauss(1.0);
  for (Eigen::Index i = 0; i < kn; ++i) u_s(i) = rng.next_cgauss(1.0);
  s_m /= s_m.norm();
  u_s /= u_s.norm();
  const ComplexVector x_s = w * u_s;
  const ComplexVector clean = ch.H_mm * s_m;
  const ComplexVector received = clean + ch.H_sm * x_s;
  SignalPathReport report;
  report.relative_residual = (received - clean).norm() / clean.norm();
  return report;
}

}  // namespace muvfdm
