#include <muvfdm/cli.hpp>
#include <muvfdm/properties.hpp>
#include <muvfdm/report.hpp>

#include "support.hpp"

#include <cstdio>
#include <fstream>

using namespace muvfdm;
using Catch::Approx;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig cfg;  // defaults: n=32, l=8, m=4, k=3, gamma_tx=4
  cfg.snr_grid_db = {0, 10, 20, 30};
  cfg.trials = 10;
  cfg.master_seed = 424242;
  return cfg;
}

std::size_t plan_index(const ScenarioConfig& cfg, double snr, Scheme scheme, Tier tier, double tau) {
  const auto plan = experiment_plan(cfg);
  for (std::size_t i = 0; i < plan.size(); ++i)
    if (plan[i].snr_db == snr && plan[i].scheme == scheme && plan[i].tier == tier &&
        plan[i].tau_fraction == tau)
      return i;
  FAIL("operating point not found in plan");
  return 0;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/muvfdm_test_") + name + "_" + std::to_string(::getpid());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run_trial is deterministic and resample-free at the default dimensioning") {
  const ScenarioConfig cfg = small_config();
  const TrialResult a = run_trial(cfg, 3);
  const TrialResult b = run_trial(cfg, 3);
  REQUIRE(a.rates.size() == experiment_plan(cfg).size());
  REQUIRE(a.rates == b.rates);
  REQUIRE(a.resamples == 0);

  const TrialResult c = run_trial(cfg, 4);
  REQUIRE(a.rates != c.rates);
}

TEST_CASE("run_sweep reduces per-trial records in trial order, independent of threads") {
  ScenarioConfig cfg = small_config();
  cfg.trials = 6;
  const SweepResult lone = run_sweep(cfg);

  ScenarioConfig threaded = cfg;
  threaded.threads = 4;
  const SweepResult multi = run_sweep(threaded);
  REQUIRE(lone.rows.size() == multi.rows.size());
  for (std::size_t i = 0; i < lone.rows.size(); ++i) {
    REQUIRE(lone.rows[i].mean_rate_bps == multi.rows[i].mean_rate_bps);
    REQUIRE(lone.rows[i].stderr_bps == multi.rows[i].stderr_bps);
  }

  // the mean is exactly the ordered average of the single-trial records
  double acc = 0.0;
  for (long t = 0; t < cfg.trials; ++t) acc += run_trial(cfg, t).rates[0];
  REQUIRE(lone.rows[0].mean_rate_bps == acc / cfg.trials);

  // first half of a longer run reproduces the shorter run's trials
  const TrialResult t2 = run_trial(cfg, 2);
  ScenarioConfig longer = cfg;
  longer.trials = 12;
  const TrialResult t2_again = run_trial(longer, 2);
  REQUIRE(t2.rates == t2_again.rates);
}

TEST_CASE("perfect-CSIT engine path equals the direct operation chain") {
  ScenarioConfig cfg = small_config();
  cfg.snr_grid_db = {10};
  cfg.trials = 1;
  const int n = cfg.subcarriers, prefix = cfg.cp_len, chains = cfg.sbs_count * cfg.gamma_tx;

  const TrialResult record = run_trial(cfg, 0);

  const auto taps = detail::draw_trial_taps(cfg, 0, 0, false);
  const auto masks = subcarrier_masks(n, cfg.mue_count);
  const ComplexMatrix h_mm = build_macro_channel(taps.mm, masks, n, prefix);
  std::vector<ComplexMatrix> blocks(chains);
  ComplexMatrix h_sm(n, chains * (n + prefix));
  for (int i = 0; i < chains; ++i) {
    blocks[i] = build_cross_channel_block(taps.sm[i], masks, n, prefix);
    h_sm.middleCols(i * (n + prefix), n + prefix) = blocks[i];
  }
  const ComplexMatrix h_ss = build_small_cell_channel(taps.ss, n, prefix, cfg.sbs_count);

  const PowerProfile p = PowerProfile::from_snr_db(10.0, cfg.sbs_count);
  const InnerPrecoder inner = build_inner_precoder(blocks);
  const ComplexMatrix e_dense = inner.dense();
  const ComplexMatrix h_bar = effective_channel(h_ss, e_dense);
  const ComplexMatrix phi_raw = ribf_outer(h_bar, p.noise_variance / p.sbs_power);
  const CascadedPrecoder cascade = normalize_cascade(e_dense, phi_raw);

  const RealVector sinrs = sue_sinr_perfect(h_bar, cascade.phi, cascade.W, p, n, prefix, cfg.sbs_count);
  const double small = ribf_sum_rate(sinrs, cfg.bandwidth_hz, n, prefix);
  const RealVector mue = mue_sinr_imperfect(h_mm, h_sm, cascade.W, p, cfg.sbs_count);
  double macro = 0.0;
  for (int j = 0; j < n; ++j) macro += std::log2(1.0 + mue(j));
  macro *= cfg.bandwidth_hz / (n + prefix);

  const double engine_small = record.rates[plan_index(cfg, 10.0, Scheme::Ribf, Tier::Small, 0.0)];
  const double engine_macro = record.rates[plan_index(cfg, 10.0, Scheme::Ribf, Tier::Macro, 0.0)];
  REQUIRE(engine_small == Approx(small).epsilon(1e-9));
  REQUIRE(engine_macro == Approx(macro).epsilon(1e-9));

  // the macro tier sits at the interference-free OFDMA value under perfect CSIT
  double clean = 0.0;
  for (int j = 0; j < n; ++j)
    clean += std::log2(1.0 + p.mbs_power * cfg.sbs_count * h_mm.row(j).squaredNorm() / p.noise_variance);
  clean *= cfg.bandwidth_hz / (n + prefix);
  REQUIRE(engine_macro == Approx(clean).epsilon(1e-8));
}

TEST_CASE("imperfect-CSIT engine path equals the direct operation chain") {
  ScenarioConfig cfg = small_config();
  cfg.csit = CsitMode::Imperfect;
  cfg.snr_grid_db = {10};
  cfg.tau_fractions = {0.1};
  cfg.trials = 1;
  const int n = cfg.subcarriers, prefix = cfg.cp_len, m_users = cfg.mue_count;
  const int k_cells = cfg.sbs_count, chains = k_cells * cfg.gamma_tx;

  const TrialResult record = run_trial(cfg, 0);

  const auto taps = detail::draw_trial_taps(cfg, 0, 0, false);
  const auto pilot = detail::draw_pilot_noise(cfg, 0, 0);
  const auto masks = subcarrier_masks(n, m_users);
  const PowerProfile p = PowerProfile::from_snr_db(10.0, k_cells);
  const double tau = 0.1 * cfg.coherence_symbols;
  const MmseWeights w = mmse_weights(p.sbs_power, tau, p.noise_variance, prefix);

  // estimate every second-tier link at the tap level, then rebuild
  std::vector<std::vector<ChannelTaps>> sm_est(chains), ss_est(chains);
  for (int i = 0; i < chains; ++i) {
    sm_est[i].resize(m_users);
    for (int j = 0; j < m_users; ++j)
      sm_est[i][j].taps =
          w.signal * taps.sm[i][j].taps + w.noise * pilot.sm[std::size_t(i) * m_users + j];
    ss_est[i].resize(k_cells);
    for (int k = 0; k < k_cells; ++k)
      ss_est[i][k].taps =
          w.signal * taps.ss[i][k].taps + w.noise * pilot.ss[std::size_t(i) * k_cells + k];
  }

  const ComplexMatrix h_mm = build_macro_channel(taps.mm, masks, n, prefix);
  std::vector<ComplexMatrix> est_blocks(chains);
  ComplexMatrix h_sm_true(n, chains * (n + prefix));
  for (int i = 0; i < chains; ++i) {
    est_blocks[i] = build_cross_channel_block(sm_est[i], masks, n, prefix);
    h_sm_true.middleCols(i * (n + prefix), n + prefix) =
        build_cross_channel_block(taps.sm[i], masks, n, prefix);
  }
  const ComplexMatrix h_ss_true = build_small_cell_channel(taps.ss, n, prefix, k_cells);
  const ComplexMatrix h_ss_est = build_small_cell_channel(ss_est, n, prefix, k_cells);

  const InnerPrecoder inner_est = build_inner_precoder(est_blocks);
  const ComplexMatrix e_dense = inner_est.dense();
  const ComplexMatrix h_bar_true = effective_channel(h_ss_true, e_dense);
  const ComplexMatrix h_bar_est = effective_channel(h_ss_est, e_dense);
  const ComplexMatrix phi_est = ribf_outer(h_bar_est, p.noise_variance / p.sbs_power);
  const double phi_norm_sq = phi_est.squaredNorm();

  const ComplexMatrix gm = h_bar_true * phi_est;
  const double noise = p.noise_variance / (p.sbs_power * k_cells * (n + prefix));
  RealVector eff(k_cells * n);
  for (Eigen::Index j = 0; j < gm.rows(); ++j) {
    const double direct = std::norm(gm(j, j));
    const double x = direct / ((gm.row(j).squaredNorm() - direct) + phi_norm_sq * noise);
    eff(j) = sue_effective_sinr(x, tau);
  }
  const ComplexMatrix leak = (h_sm_true * e_dense) * phi_est;
  RealVector mue(n);
  for (int j = 0; j < n; ++j)
    mue(j) = p.mbs_power * k_cells * h_mm.row(j).squaredNorm() /
             (leak.row(j).squaredNorm() / phi_norm_sq + p.noise_variance);
  const RatePair expected =
      sum_rates_imperfect(mue, eff, {cfg.coherence_symbols, tau}, n, prefix, k_cells, cfg.bandwidth_hz);

  const double engine_small = record.rates[plan_index(cfg, 10.0, Scheme::Ribf, Tier::Small, 0.1)];
  const double engine_macro = record.rates[plan_index(cfg, 10.0, Scheme::Ribf, Tier::Macro, 0.1)];
  REQUIRE(engine_small == Approx(expected.small_bps).epsilon(1e-9));
  REQUIRE(engine_macro == Approx(expected.macro_bps).epsilon(1e-9));
}

TEST_CASE("ergodic rates are non-decreasing in SNR for every scheme") {
  // clean second-tier comparison (no MBS->SUE interference)
  ScenarioConfig cfg = small_config();
  cfg.trials = 30;
  cfg.enable_dpc = cfg.enable_mf = true;
  SweepResult sweep = run_sweep(cfg);
  for (Scheme scheme : {Scheme::Dpc, Scheme::Ribf, Scheme::Mf}) {
    double prev = -1.0;
    for (double snr : cfg.snr_grid_db) {
      const std::size_t i = plan_index(cfg, snr, scheme, Tier::Small, 0.0);
      REQUIRE(sweep.rows[i].mean_rate_bps >= prev);
      prev = sweep.rows[i].mean_rate_bps;
    }
  }
  long resamples = 0;
  for (const auto& row : sweep.rows) resamples = std::max(resamples, row.resamples);
  REQUIRE(resamples == 0);

  // two-tier comparison mode: interference on, wide load rate
  ScenarioConfig compare = small_config();
  compare.trials = 30;
  compare.gamma_tx = 12;  // load rate 3
  compare.enable_separation = true;
  compare.mbs_interference_on_sues = true;
  // The RIBF small tier alone may dip a little here: the regularizer adapts
  // to noise while the MBS interference stays constant. Totals and the
  // interference-free separation tiers are monotone.
  sweep = run_sweep(compare);
  using SchemeTier = std::pair<Scheme, Tier>;
  for (const auto& [scheme, tier] :
       {SchemeTier{Scheme::Ribf, Tier::Macro}, SchemeTier{Scheme::Ribf, Tier::Total},
        SchemeTier{Scheme::Separation, Tier::Small}, SchemeTier{Scheme::Separation, Tier::Total}}) {
    double prev = -1.0;
    for (double snr : compare.snr_grid_db) {
      const std::size_t i = plan_index(compare, snr, scheme, tier, 0.0);
      REQUIRE(sweep.rows[i].mean_rate_bps >= prev);
      prev = sweep.rows[i].mean_rate_bps;
    }
  }
}

TEST_CASE("DPC bound dominates RIBF per trial") {
  ScenarioConfig cfg = small_config();
  cfg.enable_dpc = true;
  const auto plan = experiment_plan(cfg);
  for (long t = 0; t < 10; ++t) {
    const TrialResult rec = run_trial(cfg, t);
    for (double snr : cfg.snr_grid_db) {
      const double dpc = rec.rates[plan_index(cfg, snr, Scheme::Dpc, Tier::Small, 0.0)];
      const double ribf = rec.rates[plan_index(cfg, snr, Scheme::Ribf, Tier::Small, 0.0)];
      REQUIRE(dpc >= ribf);
    }
  }
}

TEST_CASE("standard error shrinks with the trial count") {
  ScenarioConfig cfg = small_config();
  cfg.snr_grid_db = {10};
  cfg.trials = 40;
  const SweepResult coarse = run_sweep(cfg);
  cfg.trials = 160;
  const SweepResult fine = run_sweep(cfg);
  const std::size_t i = plan_index(cfg, 10.0, Scheme::Ribf, Tier::Small, 0.0);
  REQUIRE(fine.rows[i].stderr_bps < 0.9 * coarse.rows[i].stderr_bps);
  REQUIRE(fine.rows[i].stderr_bps > 0.2 * coarse.rows[i].stderr_bps);
}

TEST_CASE("experiment plan covers the advertised grid") {
  ScenarioConfig cfg = small_config();
  cfg.csit = CsitMode::Imperfect;
  cfg.tau_fractions = {0.05, 0.1};
  cfg.enable_separation = true;
  const auto plan = experiment_plan(cfg);
  // per SNR: ribf 3 tiers x (1 + 2 taus) + separation 3 x (1 + 2)
  REQUIRE(plan.size() == cfg.snr_grid_db.size() * (3 * 3 + 3 * 3));
  for (const auto& pt : plan) REQUIRE((pt.tau_fraction == 0.0 || pt.tau_fraction == 0.05 || pt.tau_fraction == 0.1));
}

TEST_CASE("CSV round-trips bit-faithfully and the schema is stable") {
  ScenarioConfig cfg = small_config();
  cfg.snr_grid_db = {0, 10};
  cfg.trials = 3;
  cfg.enable_dpc = true;
  const SweepResult sweep = run_sweep(cfg);
  const std::string csv = to_csv({sweep});

  const auto records = parse_csv(csv);
  REQUIRE(records.size() == sweep.rows.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    REQUIRE(records[i].snr_db == sweep.rows[i].point.snr_db);
    REQUIRE(records[i].mean_rate_bps == sweep.rows[i].mean_rate_bps);
    REQUIRE(records[i].stderr_bps == sweep.rows[i].stderr_bps);
    REQUIRE(records[i].scheme == scheme_name(sweep.rows[i].point.scheme));
    REQUIRE((records[i].tier == "macro" || records[i].tier == "small" || records[i].tier == "total"));
    REQUIRE(records[i].beta == cfg.load_rate().value());
    REQUIRE(records[i].sbs_count == cfg.sbs_count);
    REQUIRE(records[i].seed == cfg.master_seed);
    REQUIRE(records[i].trials == cfg.trials);
  }

  REQUIRE(to_csv({}) == std::string(kCsvHeader) + "\n");

  const std::string json = to_json({sweep});
  const auto doc = nlohmann::json::parse(json);
  REQUIRE(doc.is_array());
  REQUIRE(doc.at(0).at("rows").size() == sweep.rows.size());
  REQUIRE(doc.at(0).at("config").at("n").get<std::string>() == "32");
}

TEST_CASE("config parsing: presets, overrides, rejection of junk") {
  const ScenarioConfig parsed = parse_config_text(
      "# scenario\n"
      "preset = paper-small\n"
      "k = 6\n"
      "beta = 3\n"
      "snr = 0,5,10\n"
      "csit = imperfect\n"
      "tau_fractions = 0.05,0.1\n"
      "coherence = 500\n"
      "separation = true\n"
      "mbs_interference_on_sues = on\n"
      "trials = 17\n"
      "seed = 99\n");
  REQUIRE(parsed.subcarriers == 64);
  REQUIRE(parsed.cp_len == 16);
  REQUIRE(parsed.bandwidth_hz == 0.96e6);
  REQUIRE(parsed.sbs_count == 6);
  REQUIRE(parsed.gamma_tx == 12);  // beta 3 with n/l = 4
  REQUIRE(parsed.csit == CsitMode::Imperfect);
  REQUIRE(parsed.coherence_symbols == 500.0);
  REQUIRE(parsed.enable_separation);
  REQUIRE(parsed.mbs_interference_on_sues);
  REQUIRE(parsed.trials == 17);
  REQUIRE(parsed.master_seed == 99);
  REQUIRE_NOTHROW(validate(parsed));

  REQUIRE_THROWS_AS(parse_config_text("frobnicate = 1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("n 32\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("trials = soon\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("beta = 2.7\n"), ConfigError);  // gamma would not be integral
  REQUIRE_THROWS_AS(preset_config("huge"), ConfigError);

  ScenarioConfig bad = small_config();
  bad.mue_count = 5;  // does not divide 32
  REQUIRE_THROWS_AS(validate(bad), ConfigError);
  bad = small_config();
  bad.gamma_tx = 2;  // load rate 1/2, RIBF infeasible
  REQUIRE_THROWS_AS(validate(bad), ConfigError);
  bad = small_config();
  bad.csit = CsitMode::Imperfect;
  bad.enable_dpc = true;
  REQUIRE_THROWS_AS(validate(bad), ConfigError);

  ScenarioConfig a = small_config(), b = small_config();
  REQUIRE(config_hash(a) == config_hash(b));
  b.master_seed += 1;
  REQUIRE(config_hash(a) != config_hash(b));
}

TEST_CASE("cli_main: exit codes and byte-identical output across thread counts") {
  REQUIRE(cli_main({"sum-rate", "--config", "/nonexistent/path.cfg"}) == 1);
  REQUIRE(cli_main({"frobnicate"}) == 1);
  REQUIRE(cli_main({"sum-rate", "--format", "yaml"}) == 1);

  const std::string out1 = temp_path("t1.csv"), out4 = temp_path("t4.csv");
  REQUIRE(cli_main({"sum-rate", "--trials", "8", "--seed", "5", "--snr", "0,10", "--threads", "1",
                    "--out", out1}) == 0);
  REQUIRE(cli_main({"sum-rate", "--trials", "8", "--seed", "5", "--snr", "0,10", "--threads", "4",
                    "--out", out4}) == 0);
  REQUIRE(slurp(out1) == slurp(out4));
  const auto records = parse_csv(slurp(out1));
  REQUIRE(!records.empty());
  std::remove(out1.c_str());
  std::remove(out4.c_str());

  const std::string json_path = temp_path("t.json");
  REQUIRE(cli_main({"sum-rate", "--trials", "2", "--seed", "5", "--snr", "0", "--format", "json",
                    "--out", json_path}) == 0);
  REQUIRE_NOTHROW(nlohmann::json::parse(slurp(json_path)));
  std::remove(json_path.c_str());

  REQUIRE(cli_main({"check", "--trials", "5", "--seed", "1"}) == 0);
}
