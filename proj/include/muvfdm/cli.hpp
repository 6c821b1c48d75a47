#pragma once

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "properties.hpp"
#include "report.hpp"

namespace muvfdm {

namespace detail {

struct CliOptions {
  std::string config_path, preset, out_path, format = "csv";
  std::string snr_list, tau_list, csit = "perfect", sweep = "beta", sweep_values;
  std::uint64_t seed = 0;
  long trials = -1;
  int threads = -1;
  double beta = 0.0;
  int gamma_tx = 0;
  int sbs_count = 0;
  double coherence = 0.0;
};

inline void emit(const std::vector<SweepResult>& results, const CliOptions& opt) {
  const std::string text = opt.format == "json" ? to_json(results) : to_csv(results);
  if (opt.out_path.empty())
    std::cout << text;
  else
    write_text_file(opt.out_path, text);
}

}  // namespace detail

/// Entry point shared by the binary and the in-process tests.
/// Exit codes: 0 success, 1 configuration/usage error, 2 numerical hard error.
inline int cli_main(std::vector<std::string> args) {
  CLI::App app{"Monte Carlo link-level simulator for a two-tiered downlink with cascaded"
               " null-space + regularized-inverse precoding at the small cells"};
  app.fallthrough();
  detail::CliOptions opt;

  app.add_option("--config", opt.config_path, "scenario file (flat key = value lines)");
  app.add_option("--preset", opt.preset, "dimensioning preset: default, paper-small, paper-full");
  auto* seed_opt = app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--trials", opt.trials, "Monte Carlo trials");
  app.add_option("--snr", opt.snr_list, "comma-separated SNR grid in dB");
  app.add_option("--tau", opt.tau_list, "comma-separated training fractions tau/T");
  app.add_option("--coherence", opt.coherence, "coherence time T in symbols");
  auto* beta_opt = app.add_option("--beta", opt.beta, "load rate (sets gamma_tx = beta*n/l)");
  auto* gamma_opt = app.add_option("--gamma-tx", opt.gamma_tx, "transmit-dimension multiplier");
  auto* k_opt = app.add_option("--k", opt.sbs_count, "number of SBS/SUE pairs");
  app.add_option("--threads", opt.threads, "worker threads (results are thread-count independent)");
  app.add_option("--out", opt.out_path, "output path (stdout when omitted)");
  app.add_option("--format", opt.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  auto* sum_rate = app.add_subcommand(
      "sum-rate", "ergodic second-tier sum-rates of the DPC bound, RIBF and MF cascades (perfect CSIT)");
  auto* csit_sweep = app.add_subcommand(
      "csit-sweep", "imperfect-vs-perfect rate ratios over the training grid and a beta or K sweep");
  csit_sweep->add_option("--sweep", opt.sweep, "sweep variable: beta or k")
      ->check(CLI::IsMember({"beta", "k"}));
  auto* values_opt = csit_sweep->add_option("--values", opt.sweep_values, "comma-separated sweep values");
  auto* compare = app.add_subcommand(
      "compare-separation", "complete sharing (with MBS->SUE interference) vs complete bandwidth separation");
  compare->add_option("--csit", opt.csit, "perfect or imperfect")
      ->check(CLI::IsMember({"perfect", "imperfect"}));
  auto* check = app.add_subcommand("check", "run the cascade property suite and report worst residuals");
  app.require_subcommand(1);

  try {
    std::vector<const char*> argv;
    argv.push_back("muvfdm");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
    }

    ScenarioConfig cfg;
    if (csit_sweep->parsed()) cfg.snr_grid_db = {0, 10, 20};
    if (!opt.preset.empty()) apply_config_key(cfg, "preset", opt.preset);
    if (!opt.config_path.empty()) cfg = load_config_file(opt.config_path, cfg);
    if (!opt.snr_list.empty()) apply_config_key(cfg, "snr", opt.snr_list);
    if (!opt.tau_list.empty()) apply_config_key(cfg, "tau_fractions", opt.tau_list);
    if (seed_opt->count()) cfg.master_seed = opt.seed;
    if (opt.trials >= 0) cfg.trials = opt.trials;
    if (opt.threads >= 0) cfg.threads = opt.threads;
    if (opt.coherence > 0) cfg.coherence_symbols = opt.coherence;
    if (k_opt->count()) cfg.sbs_count = opt.sbs_count;
    if (gamma_opt->count())
      cfg.gamma_tx = opt.gamma_tx;
    else if (beta_opt->count())
      apply_config_key(cfg, "beta", std::to_string(opt.beta));

    if (sum_rate->parsed()) {
      cfg.csit = CsitMode::Perfect;
      cfg.enable_dpc = cfg.enable_ribf = cfg.enable_mf = true;
      cfg.enable_separation = false;
      cfg.mbs_interference_on_sues = false;
      validate(cfg);
      detail::emit({run_sweep(cfg)}, opt);
      return 0;
    }

    if (csit_sweep->parsed()) {
      cfg.csit = CsitMode::Imperfect;
      cfg.enable_ribf = true;
      cfg.enable_dpc = cfg.enable_mf = cfg.enable_separation = false;
      cfg.mbs_interference_on_sues = false;
      std::vector<double> values;
      if (values_opt->count())
        values = detail::parse_double_list(opt.sweep_values, "--values");
      else
        values = opt.sweep == "beta" ? std::vector<double>{1, 2, 3} : std::vector<double>{1, 3, 6};
      std::vector<SweepResult> results;
      for (double v : values) {
        ScenarioConfig point = cfg;
        if (opt.sweep == "beta") {
          apply_config_key(point, "beta", detail::fmt17(v));
        } else {
          point.sbs_count = static_cast<int>(v);
          if (!gamma_opt->count() && !beta_opt->count()) apply_config_key(point, "beta", "3");
        }
        validate(point);
        results.push_back(run_sweep(point));
      }
      detail::emit(results, opt);
      return 0;
    }

    if (compare->parsed()) {
      cfg.csit = opt.csit == "imperfect" ? CsitMode::Imperfect : CsitMode::Perfect;
      cfg.enable_ribf = cfg.enable_separation = true;
      cfg.enable_dpc = cfg.enable_mf = false;
      cfg.mbs_interference_on_sues = true;
      validate(cfg);
      detail::emit({run_sweep(cfg)}, opt);
      return 0;
    }

    if (check->parsed()) {
      cfg.enable_ribf = true;
      validate(cfg);
      const long trials = opt.trials >= 0 ? opt.trials : 100;
      const PropertyReport report = run_property_check(cfg, trials, cfg.snr_grid_db.front());
      std::printf("property suite over %ld trials (n=%d, l=%d, k=%d, gamma_tx=%d)\n", report.trials,
                  cfg.subcarriers, cfg.cp_len, cfg.sbs_count, cfg.gamma_tx);
      std::printf("  max ||H_sm W||/||H_sm||      = %.3e   (tol 1e-10)\n", report.max_null_residual);
      std::printf("  max ||E_i^H E_i - I||        = %.3e   (tol 1e-12)\n", report.max_gram_deviation);
      std::printf("  max |tr(W^H W) - 1|          = %.3e   (tol 1e-10)\n", report.max_trace_deviation);
      std::printf("  max H_mm off-diagonal mass   = %.3e   (tol 1e-10)\n", report.max_offdiag_mass);
      std::printf("  max signal-path residual     = %.3e   (tol 1e-9)\n", report.max_signal_residual);
      std::printf("  min negative-control residual= %.3e   (must exceed 0.1)\n",
                  report.min_negative_control);
      std::printf("%s\n", report.pass() ? "all properties within tolerance" : "PROPERTY VIOLATION");
      return report.pass() ? 0 : 2;
    }

    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace muvfdm
