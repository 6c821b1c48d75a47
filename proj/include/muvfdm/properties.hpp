#pragma once

#include <limits>

#include "experiment.hpp"

namespace muvfdm {

/// Worst observed values of the structural invariants over a batch of
/// seeded realizations.
struct PropertyReport {
  double max_null_residual = 0.0;      // ||H_sm W||_F / ||H_sm||_F
  double max_gram_deviation = 0.0;     // max_i ||E_i^H E_i - I||_F
  double max_trace_deviation = 0.0;    // |tr(W^H W) - 1|
  double max_offdiag_mass = 0.0;       // ||H_mm - diag(H_mm)||_F / ||H_mm||_F
  double max_signal_residual = 0.0;    // signal-path relative residual
  double min_negative_control = std::numeric_limits<double>::infinity();
  long trials = 0;

  bool pass() const {
    return max_null_residual <= 1e-10 && max_gram_deviation <= 1e-12 && max_trace_deviation <= 1e-10 &&
           max_offdiag_mass <= 1e-10 && max_signal_residual <= 1e-9 && min_negative_control > 0.1;
  }
};

/// Runs the cascade-construction invariants over `trials` fresh channel
/// realizations of `cfg` at the given operating SNR.
inline PropertyReport run_property_check(const ScenarioConfig& cfg, long trials, double snr_db) {
  validate(cfg);
  PropertyReport report;
  const int n = cfg.subcarriers, prefix = cfg.cp_len;
  const int chains = cfg.sbs_count * cfg.gamma_tx;
  const PowerProfile power = PowerProfile::from_snr_db(snr_db, cfg.sbs_count);
  const auto masks = subcarrier_masks(n, cfg.mue_count);

  for (long t = 0; t < trials; ++t) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 10) throw std::runtime_error("property check: resample cap exceeded");
      try {
        const auto taps = detail::draw_trial_taps(cfg, static_cast<std::uint64_t>(t), attempt, false);
        const ComplexMatrix h_mm = build_macro_channel(taps.mm, masks, n, prefix);
        AggregateChannels ch;
        ch.H_mm = h_mm;
        ch.H_sm_blocks.resize(chains);
        for (int i = 0; i < chains; ++i)
          ch.H_sm_blocks[i] = build_cross_channel_block(taps.sm[i], masks, n, prefix);
        ch.H_sm.resize(n, static_cast<Eigen::Index>(chains) * (n + prefix));
        for (int i = 0; i < chains; ++i)
          ch.H_sm.middleCols(static_cast<Eigen::Index>(i) * (n + prefix), n + prefix) = ch.H_sm_blocks[i];
        ch.H_ss = build_small_cell_channel(taps.ss, n, prefix, cfg.sbs_count);

        const InnerPrecoder inner = build_inner_precoder(ch.H_sm_blocks);
        const ComplexMatrix h_bar = effective_channel(ch.H_ss, inner);
        const ComplexMatrix phi = ribf_outer(h_bar, power.noise_variance / power.sbs_power);
        const CascadedPrecoder cascade = normalize_cascade(inner, phi);

        report.max_null_residual =
            std::max(report.max_null_residual, (ch.H_sm * cascade.W).norm() / ch.H_sm.norm());
        for (const auto& block : inner.blocks) {
          const ComplexMatrix gram = block.adjoint() * block;
          report.max_gram_deviation = std::max(
              report.max_gram_deviation,
              (gram - ComplexMatrix::Identity(gram.rows(), gram.cols())).norm());
        }
        report.max_trace_deviation =
            std::max(report.max_trace_deviation, std::abs(cascade.W.squaredNorm() - 1.0));
        report.max_offdiag_mass = std::max(
            report.max_offdiag_mass,
            (h_mm - ComplexMatrix(h_mm.diagonal().asDiagonal())).norm() / h_mm.norm());

        auto probe_rng = derive_stream(cfg.master_seed, static_cast<std::uint64_t>(t), attempt,
                                       purpose_id(StreamPurpose::ProbeSymbols));
        report.max_signal_residual =
            std::max(report.max_signal_residual, signal_path_check(ch, cascade.W, probe_rng).relative_residual);

        // Negative control: an unstructured random cascade must leak.
        auto control_rng = derive_stream(cfg.master_seed, static_cast<std::uint64_t>(t), attempt,
                                         purpose_id(StreamPurpose::RandomCascade));
        ComplexMatrix w_random(cascade.W.rows(), cascade.W.cols());
        for (Eigen::Index c = 0; c < w_random.cols(); ++c)
          for (Eigen::Index r = 0; r < w_random.rows(); ++r) w_random(r, c) = control_rng.next_cgauss(1.0);
        report.min_negative_control = std::min(
            report.min_negative_control, signal_path_check(ch, w_random, control_rng).relative_residual);
        break;
      } catch (const DegenerateChannelError&) {
      } catch (const SingularSystemError&) {
      }
    }
  }
  report.trials = trials;
  return report;
}

}  // namespace muvfdm
