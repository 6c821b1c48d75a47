#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "config.hpp"
#include "metrics.hpp"

namespace muvfdm {

enum class Scheme { Dpc, Ribf, Mf, Separation };
enum class Tier { Macro, Small, Total };

struct OperatingPoint {
  double snr_db = 0.0;
  Scheme scheme = Scheme::Ribf;
  Tier tier = Tier::Small;
  double tau_fraction = 0.0;  // 0 marks perfect CSIT
};

namespace detail {

/// Single source of truth for the record layout: every consumer walks the
/// points in this exact order. tau_slot 0 is the perfect-CSIT value, slots
/// 1..tau_fractions.size() index the training grid.
template <typename F>
void enumerate_points(const ScenarioConfig& cfg, F&& f) {
  const std::size_t taus = cfg.csit == CsitMode::Imperfect ? cfg.tau_fractions.size() : 0;
  constexpr Tier kTiers[] = {Tier::Macro, Tier::Small, Tier::Total};
  for (std::size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    if (cfg.enable_dpc) f(s, Scheme::Dpc, Tier::Small, std::size_t{0});
    for (Scheme scheme : {Scheme::Ribf, Scheme::Mf}) {
      if (scheme == Scheme::Ribf && !cfg.enable_ribf) continue;
      if (scheme == Scheme::Mf && !cfg.enable_mf) continue;
      for (Tier tier : kTiers) f(s, scheme, tier, std::size_t{0});
      if (scheme == Scheme::Ribf)
        for (std::size_t u = 1; u <= taus; ++u)
          for (Tier tier : kTiers) f(s, scheme, tier, u);
    }
    if (cfg.enable_separation) {
      for (Tier tier : kTiers) f(s, Scheme::Separation, tier, std::size_t{0});
      for (std::size_t u = 1; u <= taus; ++u)
        for (Tier tier : kTiers) f(s, Scheme::Separation, tier, u);
    }
  }
}

}  // namespace detail

inline std::vector<OperatingPoint> experiment_plan(const ScenarioConfig& cfg) {
  std::vector<OperatingPoint> plan;
  detail::enumerate_points(cfg, [&](std::size_t s, Scheme scheme, Tier tier, std::size_t tau_slot) {
    plan.push_back({cfg.snr_grid_db[s], scheme, tier,
                    tau_slot == 0 ? 0.0 : cfg.tau_fractions[tau_slot - 1]});
  });
  return plan;
}

struct TrialResult {
  std::vector<double> rates;  // aligned with experiment_plan(cfg)
  long resamples = 0;
};

namespace detail {

struct TrialScratch {
  // per (snr, scheme, tau_slot) rate pairs; DPC stores the bound in small_bps
  std::vector<RatePair> table;
  std::size_t snr_count = 0, tau_slots = 1;

  void init(std::size_t snrs, std::size_t taus) {
    snr_count = snrs;
    tau_slots = taus + 1;
    table.assign(snrs * 4 * tau_slots, RatePair{});
  }
  RatePair& at(std::size_t s, Scheme scheme, std::size_t tau_slot) {
    return table[(s * 4 + static_cast<std::size_t>(scheme)) * tau_slots + tau_slot];
  }
};

inline ComplexVector draw_gauss_vector(RandomStream& rng, int n, double variance) {
  ComplexVector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.next_cgauss(variance);
  return v;
}

/// All link impulse responses of one realization.
struct TapsSet {
  std::vector<ChannelTaps> mm;               // M
  std::vector<std::vector<ChannelTaps>> sm;  // [chain][mue]
  std::vector<std::vector<ChannelTaps>> ss;  // [chain][sue]
  std::vector<ChannelTaps> ms;               // K (only when the MBS->SUE path is modeled)
};

inline TapsSet draw_trial_taps(const ScenarioConfig& cfg, std::uint64_t trial, std::uint64_t attempt,
                               bool with_ms) {
  const int chains = cfg.sbs_count * cfg.gamma_tx;
  TapsSet taps;
  taps.mm.reserve(cfg.mue_count);
  for (int j = 0; j < cfg.mue_count; ++j) {
    auto rng = derive_stream(cfg.master_seed, trial, attempt, purpose_id(StreamPurpose::MacroToMueTaps, 0, j));
    taps.mm.push_back(draw_taps(rng, cfg.cp_len, {Station::Macro, 1, Station::Macro, j + 1}));
  }
  taps.sm.resize(chains);
  taps.ss.resize(chains);
  for (int i = 0; i < chains; ++i) {
    taps.sm[i].reserve(cfg.mue_count);
    for (int j = 0; j < cfg.mue_count; ++j) {
      auto rng = derive_stream(cfg.master_seed, trial, attempt, purpose_id(StreamPurpose::SbsToMueTaps, i, j));
      taps.sm[i].push_back(draw_taps(rng, cfg.cp_len, {Station::Small, i + 1, Station::Macro, j + 1}));
    }
    taps.ss[i].reserve(cfg.sbs_count);
    for (int k = 0; k < cfg.sbs_count; ++k) {
      auto rng = derive_stream(cfg.master_seed, trial, attempt, purpose_id(StreamPurpose::SbsToSueTaps, i, k));
      taps.ss[i].push_back(draw_taps(rng, cfg.cp_len, {Station::Small, i + 1, Station::Small, k + 1}));
    }
  }
  if (with_ms) {
    taps.ms.reserve(cfg.sbs_count);
    for (int k = 0; k < cfg.sbs_count; ++k) {
      auto rng = derive_stream(cfg.master_seed, trial, attempt, purpose_id(StreamPurpose::MacroToSueTaps, 0, k));
      taps.ms.push_back(draw_taps(rng, cfg.cp_len, {Station::Macro, 1, Station::Small, k + 1}));
    }
  }
  return taps;
}

/// Unit-variance pilot-noise draws, one vector per estimated link. The same
/// draw serves the whole (snr, tau) grid: the MMSE estimate is the scalar
/// mix a*h + b*n0, so sharing n0 is common-random-numbers across the grid.
struct PilotNoise {
  std::vector<ComplexVector> sm;  // [chain*M + j]
  std::vector<ComplexVector> ss;  // [chain*K + k]
};

inline PilotNoise draw_pilot_noise(const ScenarioConfig& cfg, std::uint64_t trial, std::uint64_t attempt) {
  const int chains = cfg.sbs_count * cfg.gamma_tx;
  PilotNoise noise;
  noise.sm.reserve(static_cast<std::size_t>(chains) * cfg.mue_count);
  noise.ss.reserve(static_cast<std::size_t>(chains) * cfg.sbs_count);
  for (int i = 0; i < chains; ++i)
    for (int j = 0; j < cfg.mue_count; ++j) {
      auto rng =
          derive_stream(cfg.master_seed, trial, attempt, purpose_id(StreamPurpose::PilotNoiseSbsToMue, i, j));
      noise.sm.push_back(draw_gauss_vector(rng, cfg.cp_len + 1, 1.0));
    }
  for (int i = 0; i < chains; ++i)
    for (int k = 0; k < cfg.sbs_count; ++k) {
      auto rng =
          derive_stream(cfg.master_seed, trial, attempt, purpose_id(StreamPurpose::PilotNoiseSbsToSue, i, k));
      noise.ss.push_back(draw_gauss_vector(rng, cfg.cp_len + 1, 1.0));
    }
  return noise;
}

inline std::vector<std::vector<ChannelTaps>> mix_taps_grid(const std::vector<std::vector<ChannelTaps>>& truth,
                                                           const std::vector<ComplexVector>& noise,
                                                           std::size_t inner_count, double a, double b) {
  std::vector<std::vector<ChannelTaps>> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out[i].resize(truth[i].size());
    for (std::size_t j = 0; j < truth[i].size(); ++j) {
      out[i][j].label = truth[i][j].label;
      out[i][j].taps = a * truth[i][j].taps + b * noise[i * inner_count + j];
    }
  }
  return out;
}

inline TrialResult run_trial_attempt(const ScenarioConfig& cfg, std::uint64_t trial, std::uint64_t attempt) {
  const int n = cfg.subcarriers, prefix = cfg.cp_len, m_users = cfg.mue_count, k_cells = cfg.sbs_count;
  const int chains = k_cells * cfg.gamma_tx;
  const int block = n + prefix;
  const Eigen::Index kn = static_cast<Eigen::Index>(k_cells) * n;
  const bool imperfect = cfg.csit == CsitMode::Imperfect;
  const bool needs_sharing = cfg.enable_ribf || cfg.enable_mf || cfg.enable_dpc;
  const double bw = cfg.bandwidth_hz;

  const TapsSet taps = draw_trial_taps(cfg, trial, attempt, cfg.mbs_interference_on_sues);

  const auto masks = subcarrier_masks(n, m_users);
  const ComplexMatrix h_mm = build_macro_channel(taps.mm, masks, n, prefix);
  RealVector mm_row_power(n);
  for (int j = 0; j < n; ++j) mm_row_power(j) = h_mm.row(j).squaredNorm();

  std::vector<ComplexMatrix> sm_blocks(chains);
  for (int i = 0; i < chains; ++i) sm_blocks[i] = build_cross_channel_block(taps.sm[i], masks, n, prefix);
  const ComplexMatrix h_ss = needs_sharing ? build_small_cell_channel(taps.ss, n, prefix, k_cells)
                                           : ComplexMatrix();

  // Raw MBS->SUE interference row powers ||row_j H_ms||^2; the SNR-dependent
  // scaling P_m / (P_s K (N+L)) is applied where they enter a denominator.
  RealVector ms_interference;
  if (cfg.mbs_interference_on_sues && needs_sharing) {
    const ComplexMatrix h_ms = build_mbs_to_sue_channel(taps.ms, n, prefix);
    ms_interference.resize(kn);
    for (Eigen::Index j = 0; j < kn; ++j) ms_interference(j) = h_ms.row(j).squaredNorm();
  }

  // The bandwidth-separation baseline keeps the legacy layout: one transmit
  // chain per SBS, joint ZF across the K cells per subcarrier. The gamma_tx
  // densification is the flexible-deployment knob of the sharing scheme, not
  // of the traditional baseline it is measured against.
  SeparationChannel sep_truth, sep_noise;
  auto first_chain_of_each_sbs = [&](const std::vector<std::vector<ChannelTaps>>& grid) {
    std::vector<std::vector<ChannelTaps>> out(k_cells);
    for (int cell = 0; cell < k_cells; ++cell) out[cell] = grid[static_cast<std::size_t>(cell) * cfg.gamma_tx];
    return out;
  };
  if (cfg.enable_separation) {
    sep_truth = build_separation_channel(taps.mm, masks, first_chain_of_each_sbs(taps.ss), n, k_cells);
  }

  PilotNoise pilot;
  std::vector<ComplexMatrix> sm_noise_blocks;
  ComplexMatrix h_ss_noise;
  if (imperfect) {
    pilot = draw_pilot_noise(cfg, trial, attempt);
    sm_noise_blocks.resize(chains);
    std::vector<std::vector<ChannelTaps>> sm_noise_taps(chains), ss_noise_taps(chains);
    for (int i = 0; i < chains; ++i) {
      sm_noise_taps[i].resize(m_users);
      for (int j = 0; j < m_users; ++j)
        sm_noise_taps[i][j].taps = pilot.sm[static_cast<std::size_t>(i) * m_users + j];
      ss_noise_taps[i].resize(k_cells);
      for (int k = 0; k < k_cells; ++k)
        ss_noise_taps[i][k].taps = pilot.ss[static_cast<std::size_t>(i) * k_cells + k];
      sm_noise_blocks[i] = build_cross_channel_block(sm_noise_taps[i], masks, n, prefix);
    }
    if (needs_sharing) h_ss_noise = build_small_cell_channel(ss_noise_taps, n, prefix, k_cells);
    if (cfg.enable_separation)
      sep_noise = build_separation_channel(taps.mm, masks, first_chain_of_each_sbs(ss_noise_taps), n, k_cells);
  }

  // Perfect-CSIT machinery, shared across the SNR grid through the
  // eigendecomposition of H_bar H_bar^H.
  InnerPrecoder inner_true;
  Eigen::MatrixXd u_abs_sq;       // |U|^2, KN x KN
  RealVector eigenvalues;         // ascending, clamped at 0
  Eigen::MatrixXd m1u_abs_sq;     // |(H_sm E) H_bar^H U|^2, N x KN
  if (needs_sharing) {
    inner_true = build_inner_precoder(sm_blocks);
    const ComplexMatrix h_bar = effective_channel(h_ss, inner_true);
    ComplexMatrix gram = ComplexMatrix::Zero(kn, kn);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(h_bar);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(ComplexMatrix(gram.selfadjointView<Eigen::Lower>()));
    eigenvalues = es.eigenvalues().cwiseMax(0.0);
    u_abs_sq = es.eigenvectors().cwiseAbs2();
    ComplexMatrix leak_eff(n, inner_true.cols());
    Eigen::Index col = 0;
    for (int i = 0; i < chains; ++i) {
      leak_eff.middleCols(col, inner_true.blocks[i].cols()).noalias() =
          sm_blocks[i] * inner_true.blocks[i];
      col += inner_true.blocks[i].cols();
    }
    ComplexMatrix m1u;
    m1u.noalias() = (leak_eff * h_bar.adjoint()) * es.eigenvectors();
    m1u_abs_sq = m1u.cwiseAbs2();
  }

  TrialScratch scratch;
  scratch.init(cfg.snr_grid_db.size(), imperfect ? cfg.tau_fractions.size() : 0);

  for (std::size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    const PowerProfile power = PowerProfile::from_snr_db(cfg.snr_grid_db[s], k_cells);
    const double alpha = power.noise_variance / power.sbs_power;
    const double noise_term = power.noise_variance / (power.sbs_power * k_cells * block);

    if (cfg.enable_dpc) {
      double bound = 0.0;
      const double scale = block * power.sbs_power / (power.noise_variance * prefix * cfg.gamma_tx);
      for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        bound += std::log2(1.0 + scale * eigenvalues(i));
      scratch.at(s, Scheme::Dpc, 0).small_bps = bw / block * bound;
    }

    // Perfect-CSIT rows for the linear outer stages: spectral weights
    // d_k = lambda/(lambda+alpha) for RIBF, d_k = lambda for MF.
    for (Scheme scheme : {Scheme::Ribf, Scheme::Mf}) {
      if (scheme == Scheme::Ribf && !cfg.enable_ribf) continue;
      if (scheme == Scheme::Mf && !cfg.enable_mf) continue;
      RealVector d(eigenvalues.size()), leak_w(eigenvalues.size());
      double phi_norm_sq = 0.0;
      for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        const double lam = eigenvalues(i);
        if (scheme == Scheme::Ribf) {
          d(i) = lam / (lam + alpha);
          phi_norm_sq += lam / ((lam + alpha) * (lam + alpha));
          leak_w(i) = 1.0 / ((lam + alpha) * (lam + alpha));
        } else {
          d(i) = lam;
          phi_norm_sq += lam;
          leak_w(i) = 1.0;
        }
      }
      const RealVector gm_diag = u_abs_sq * d;
      const RealVector gm_row_sq = u_abs_sq * d.cwiseProduct(d);
      double small = 0.0;
      for (Eigen::Index j = 0; j < kn; ++j) {
        const double direct = gm_diag(j) * gm_diag(j);
        double denom = (gm_row_sq(j) - direct) + phi_norm_sq * noise_term;
        if (ms_interference.size() > 0)
          denom += phi_norm_sq * power.mbs_power * ms_interference(j) /
                   (power.sbs_power * k_cells * block);
        small += std::log2(1.0 + direct / denom);
      }
      const RealVector leak_row_sq = m1u_abs_sq * leak_w;
      double macro = 0.0;
      for (int j = 0; j < n; ++j) {
        const double interference = leak_row_sq(j) / phi_norm_sq;
        macro += std::log2(1.0 + power.mbs_power * k_cells * mm_row_power(j) /
                                     (interference + power.noise_variance));
      }
      RatePair& out = scratch.at(s, scheme, 0);
      out.small_bps = bw / block * small;
      out.macro_bps = bw / block * macro;
    }

    if (cfg.enable_separation)
      scratch.at(s, Scheme::Separation, 0) =
          complete_separation_rates(sep_truth, power, bw, n, prefix, k_cells);

    if (!imperfect) continue;

    for (std::size_t u = 0; u < cfg.tau_fractions.size(); ++u) {
      const double tau = cfg.tau_fractions[u] * cfg.coherence_symbols;
      const TrainingBudget budget{cfg.coherence_symbols, tau};
      const MmseWeights w = mmse_weights(power.sbs_power, tau, power.noise_variance, prefix);

      if (needs_sharing) {
        std::vector<ComplexMatrix> est_blocks(chains);
        for (int i = 0; i < chains; ++i)
          est_blocks[i] = w.signal * sm_blocks[i] + w.noise * sm_noise_blocks[i];
        const InnerPrecoder inner_est = build_inner_precoder(est_blocks);
        const ComplexMatrix h_bar_true = effective_channel(h_ss, inner_est);
        const ComplexMatrix h_bar_noise = effective_channel(h_ss_noise, inner_est);
        const ComplexMatrix h_bar_est = w.signal * h_bar_true + w.noise * h_bar_noise;

        ComplexMatrix gram = ComplexMatrix::Zero(kn, kn);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(h_bar_est);
        gram.diagonal().array() += alpha;
        Eigen::LLT<ComplexMatrix> llt(ComplexMatrix(gram.selfadjointView<Eigen::Lower>()));
        if (llt.info() != Eigen::Success)
          throw SingularSystemError("singular system: estimated RIBF Gram matrix");
        const ComplexMatrix phi = llt.solve(h_bar_est).adjoint();
        const double phi_norm_sq = phi.squaredNorm();

        ComplexMatrix gm;
        gm.noalias() = h_bar_true * phi;
        RealVector inner_sinrs(kn);
        for (Eigen::Index j = 0; j < kn; ++j) {
          const double direct = std::norm(gm(j, j));
          double denom = (gm.row(j).squaredNorm() - direct) + phi_norm_sq * noise_term;
          if (ms_interference.size() > 0)
            denom += phi_norm_sq * power.mbs_power * ms_interference(j) /
                     (power.sbs_power * k_cells * block);
          inner_sinrs(j) = direct / denom;
        }
        RealVector eff_sinrs(kn);
        for (Eigen::Index j = 0; j < kn; ++j) eff_sinrs(j) = sue_effective_sinr(inner_sinrs(j), tau);

        ComplexMatrix leak_eff(n, inner_est.cols());
        Eigen::Index col = 0;
        for (int i = 0; i < chains; ++i) {
          leak_eff.middleCols(col, inner_est.blocks[i].cols()).noalias() =
              sm_blocks[i] * inner_est.blocks[i];
          col += inner_est.blocks[i].cols();
        }
        ComplexMatrix leak_rows;
        leak_rows.noalias() = leak_eff * phi;
        RealVector mue_sinrs(n);
        for (int j = 0; j < n; ++j)
          mue_sinrs(j) = power.mbs_power * k_cells * mm_row_power(j) /
                         (leak_rows.row(j).squaredNorm() / phi_norm_sq + power.noise_variance);

        scratch.at(s, Scheme::Ribf, u + 1) =
            sum_rates_imperfect(mue_sinrs, eff_sinrs, budget, n, prefix, k_cells, bw);
      }

      if (cfg.enable_separation) {
        SeparationChannel sep_est;
        sep_est.macro_gains = sep_truth.macro_gains;  // macro link unaffected by SBS estimation
        sep_est.small_gains.resize(sep_truth.small_gains.size());
        for (std::size_t sc = 0; sc < sep_truth.small_gains.size(); ++sc)
          sep_est.small_gains[sc] = w.signal * sep_truth.small_gains[sc] + w.noise * sep_noise.small_gains[sc];
        scratch.at(s, Scheme::Separation, u + 1) = complete_separation_rates_imperfect(
            sep_truth, sep_est, power, bw, n, prefix, k_cells, budget);
      }
    }
  }

  TrialResult result;
  enumerate_points(cfg, [&](std::size_t s, Scheme scheme, Tier tier, std::size_t tau_slot) {
    const RatePair& pair = scratch.at(s, scheme, tau_slot);
    const double value = tier == Tier::Macro   ? pair.macro_bps
                         : tier == Tier::Small ? pair.small_bps
                                               : pair.total();
    result.rates.push_back(value);
  });
  return result;
}

}  // namespace detail

/// One deterministic Monte Carlo trial. Degenerate channel draws are
/// resampled from fresh substreams (cap 10), every other input change is a
/// hard error.
inline TrialResult run_trial(const ScenarioConfig& cfg, std::uint64_t trial_index) {
  validate(cfg);
  long resamples = 0;
  for (std::uint64_t attempt = 0; attempt < 11; ++attempt) {
    try {
      TrialResult result = detail::run_trial_attempt(cfg, trial_index, attempt);
      result.resamples = resamples;
      return result;
    } catch (const DegenerateChannelError&) {
      ++resamples;
    } catch (const SingularSystemError&) {
      ++resamples;
    } catch (const DegeneratePrecoderError&) {
      ++resamples;
    }
    if (resamples > 10)
      throw std::runtime_error("trial " + std::to_string(trial_index) +
                               ": resample cap exceeded (numerics bug or pathological config)");
  }
  throw std::runtime_error("unreachable");
}

struct ResultRow {
  OperatingPoint point;
  double mean_rate_bps = 0.0;
  double stderr_bps = 0.0;
  long trials_used = 0;
  long resamples = 0;
};

struct SweepResult {
  ScenarioConfig config;
  std::uint64_t config_hash = 0;
  std::vector<ResultRow> rows;
};

/// Ergodic sweep: trials run independently (possibly on several threads) and
/// reduce in trial order, so the result is bit-identical for any thread
/// count and any execution order.
inline SweepResult run_sweep(const ScenarioConfig& cfg) {
  validate(cfg);
  const std::vector<OperatingPoint> plan = experiment_plan(cfg);
  const long trials = cfg.trials;
  std::vector<TrialResult> per_trial(static_cast<std::size_t>(trials));

  const int workers = static_cast<int>(std::min<long>(cfg.threads, trials));
  if (workers <= 1) {
    for (long t = 0; t < trials; ++t) per_trial[static_cast<std::size_t>(t)] = run_trial(cfg, t);
  } else {
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
      for (;;) {
        const long t = next.fetch_add(1);
        if (t >= trials || failed.load()) return;
        try {
          per_trial[static_cast<std::size_t>(t)] = run_trial(cfg, static_cast<std::uint64_t>(t));
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  long total_resamples = 0;
  for (const auto& r : per_trial) total_resamples += r.resamples;

  SweepResult out;
  out.config = cfg;
  out.config_hash = config_hash(cfg);
  out.rows.resize(plan.size());
  for (std::size_t p = 0; p < plan.size(); ++p) {
    double mean = 0.0;
    for (long t = 0; t < trials; ++t) mean += per_trial[static_cast<std::size_t>(t)].rates[p];
    mean /= static_cast<double>(trials);
    double ssq = 0.0;
    for (long t = 0; t < trials; ++t) {
      const double d = per_trial[static_cast<std::size_t>(t)].rates[p] - mean;
      ssq += d * d;
    }
    const double stderr_bps =
        trials > 1 ? std::sqrt(ssq / (static_cast<double>(trials) * (trials - 1))) : 0.0;
    out.rows[p] = {plan[p], mean, stderr_bps, trials, total_resamples};
  }
  return out;
}

}  // namespace muvfdm
