#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "precoder.hpp"

namespace muvfdm {

enum class CsitMode { Perfect, Imperfect };

/// Full dimensioning of one Monte Carlo experiment.
struct ScenarioConfig {
  int subcarriers = 32;  // N
  int cp_len = 8;        // L
  int mue_count = 4;     // M
  int sbs_count = 3;     // K
  int gamma_tx = 4;
  int gamma_rx = 1;
  double bandwidth_hz = 0.48e6;
  std::vector<double> snr_grid_db = {0, 5, 10, 15, 20, 25, 30};
  CsitMode csit = CsitMode::Perfect;
  double coherence_symbols = 1000.0;  // T
  std::vector<double> tau_fractions = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  bool mbs_interference_on_sues = false;
  bool enable_ribf = true;
  bool enable_mf = false;
  bool enable_dpc = false;
  bool enable_separation = false;
  long trials = 200;
  std::uint64_t master_seed = 1;
  int threads = 1;  // execution detail; results are independent of it

  LoadRate load_rate() const { return LoadRate::of(gamma_tx, gamma_rx, subcarriers, cp_len); }
};

/// Named dimensionings. "default" keeps test runs fast; the two "paper"
/// presets match the LTE extended-mode numerology at full and halved size.
inline ScenarioConfig preset_config(const std::string& name) {
  ScenarioConfig cfg;
  if (name == "default") {
    cfg.subcarriers = 32;
    cfg.cp_len = 8;
    cfg.bandwidth_hz = 0.48e6;
  } else if (name == "paper-small") {
    cfg.subcarriers = 64;
    cfg.cp_len = 16;
    cfg.bandwidth_hz = 0.96e6;
  } else if (name == "paper-full") {
    cfg.subcarriers = 128;
    cfg.cp_len = 32;
    cfg.bandwidth_hz = 1.92e6;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected default, paper-small or paper-full)");
  }
  cfg.mue_count = 4;
  cfg.gamma_tx = cfg.subcarriers / cfg.cp_len;  // load rate 1
  return cfg;
}

inline void validate(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (cfg.subcarriers < 2) fail("n must be at least 2");
  if (cfg.cp_len <= 0 || cfg.cp_len >= cfg.subcarriers) fail("l must satisfy 0 < l < n");
  if (cfg.mue_count < 1 || cfg.subcarriers % cfg.mue_count != 0) fail("m must divide n");
  if (cfg.sbs_count < 1) fail("k must be positive");
  if (cfg.gamma_rx != 1) fail("gamma_rx must be 1");
  if (cfg.gamma_tx < 1) fail("gamma_tx must be positive");
  if (cfg.bandwidth_hz <= 0) fail("bandwidth must be positive");
  if (cfg.snr_grid_db.empty()) fail("snr grid must not be empty");
  if (cfg.trials < 1) fail("trials must be positive");
  if (cfg.threads < 1) fail("threads must be positive");
  if (cfg.enable_ribf && !cfg.load_rate().ribf_feasible())
    fail("RIBF needs gamma_tx*l >= gamma_rx*n (load rate >= 1)");
  if (cfg.csit == CsitMode::Imperfect) {
    if (cfg.coherence_symbols <= 0) fail("coherence must be positive");
    if (cfg.tau_fractions.empty()) fail("tau_fractions must not be empty");
    for (double f : cfg.tau_fractions)
      if (!(f > 0.0 && f <= 1.0)) fail("tau fractions must lie in (0, 1]");
    if (cfg.enable_dpc || cfg.enable_mf) fail("imperfect csit supports the ribf and separation schemes only");
  }
  if (!cfg.enable_ribf && !cfg.enable_mf && !cfg.enable_dpc && !cfg.enable_separation)
    fail("no scheme enabled");
}

namespace detail {

inline std::string join_doubles(const std::vector<double>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ',';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", xs[i]);
    os << buf;
  }
  return os.str();
}

inline std::vector<double> parse_double_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::string token;
  std::istringstream is(text);
  while (std::getline(is, token, ',')) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(token, &pos);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + token + "' for key '" + key + "'");
    }
    while (pos < token.size() && std::isspace(static_cast<unsigned char>(token[pos]))) ++pos;
    if (pos != token.size()) throw ConfigError("bad number '" + token + "' for key '" + key + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list for key '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("bad boolean '" + v + "' for key '" + key + "'");
}

template <typename T>
T parse_integer(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<T>(x);
  } catch (const std::exception&) {
    throw ConfigError("bad integer '" + v + "' for key '" + key + "'");
  }
}

}  // namespace detail

/// Canonical flat key-value form; also the hashing and JSON base.
inline std::vector<std::pair<std::string, std::string>> config_items(const ScenarioConfig& cfg) {
  char buf[32];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  return {
      {"n", std::to_string(cfg.subcarriers)},
      {"l", std::to_string(cfg.cp_len)},
      {"m", std::to_string(cfg.mue_count)},
      {"k", std::to_string(cfg.sbs_count)},
      {"gamma_tx", std::to_string(cfg.gamma_tx)},
      {"gamma_rx", std::to_string(cfg.gamma_rx)},
      {"bandwidth", fmt(cfg.bandwidth_hz)},
      {"snr", detail::join_doubles(cfg.snr_grid_db)},
      {"csit", cfg.csit == CsitMode::Perfect ? "perfect" : "imperfect"},
      {"coherence", fmt(cfg.coherence_symbols)},
      {"tau_fractions", detail::join_doubles(cfg.tau_fractions)},
      {"mbs_interference_on_sues", cfg.mbs_interference_on_sues ? "true" : "false"},
      {"ribf", cfg.enable_ribf ? "true" : "false"},
      {"mf", cfg.enable_mf ? "true" : "false"},
      {"dpc", cfg.enable_dpc ? "true" : "false"},
      {"separation", cfg.enable_separation ? "true" : "false"},
      {"trials", std::to_string(cfg.trials)},
      {"seed", std::to_string(cfg.master_seed)},
  };
}

inline std::string canonical_text(const ScenarioConfig& cfg) {
  std::ostringstream os;
  for (const auto& [k, v] : config_items(cfg)) os << k << " = " << v << "\n";
  return os.str();
}

/// FNV-1a over the canonical text (threads excluded: execution detail).
inline std::uint64_t config_hash(const ScenarioConfig& cfg) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : canonical_text(cfg)) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Applies one key = value assignment. Unknown keys are rejected.
inline void apply_config_key(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "preset") {
    const ScenarioConfig base = preset_config(value);
    cfg.subcarriers = base.subcarriers;
    cfg.cp_len = base.cp_len;
    cfg.mue_count = base.mue_count;
    cfg.bandwidth_hz = base.bandwidth_hz;
    cfg.gamma_tx = base.gamma_tx;
  } else if (key == "n") {
    cfg.subcarriers = parse_integer<int>(value, key);
  } else if (key == "l") {
    cfg.cp_len = parse_integer<int>(value, key);
  } else if (key == "m") {
    cfg.mue_count = parse_integer<int>(value, key);
  } else if (key == "k") {
    cfg.sbs_count = parse_integer<int>(value, key);
  } else if (key == "gamma_tx") {
    cfg.gamma_tx = parse_integer<int>(value, key);
  } else if (key == "gamma_rx") {
    cfg.gamma_rx = parse_integer<int>(value, key);
  } else if (key == "beta") {
    const double beta = parse_double_list(value, key).at(0);
    const double gamma = beta * cfg.subcarriers / cfg.cp_len;
    if (std::abs(gamma - std::round(gamma)) > 1e-9 || gamma < 1.0)
      throw ConfigError("beta = " + value + " needs gamma_tx = beta*n/l to be a positive integer");
    cfg.gamma_tx = static_cast<int>(std::llround(gamma));
  } else if (key == "bandwidth") {
    cfg.bandwidth_hz = parse_double_list(value, key).at(0);
  } else if (key == "snr") {
    cfg.snr_grid_db = parse_double_list(value, key);
  } else if (key == "csit") {
    if (value == "perfect")
      cfg.csit = CsitMode::Perfect;
    else if (value == "imperfect")
      cfg.csit = CsitMode::Imperfect;
    else
      throw ConfigError("csit must be 'perfect' or 'imperfect'");
  } else if (key == "coherence") {
    cfg.coherence_symbols = parse_double_list(value, key).at(0);
  } else if (key == "tau_fractions") {
    cfg.tau_fractions = parse_double_list(value, key);
  } else if (key == "mbs_interference_on_sues") {
    cfg.mbs_interference_on_sues = parse_bool(value, key);
  } else if (key == "outer") {
    cfg.enable_ribf = cfg.enable_mf = false;
    std::istringstream is(value);
    std::string token;
    while (std::getline(is, token, ',')) {
      if (token == "ribf")
        cfg.enable_ribf = true;
      else if (token == "mf")
        cfg.enable_mf = true;
      else
        throw ConfigError("outer must list 'ribf' and/or 'mf'");
    }
  } else if (key == "dpc") {
    cfg.enable_dpc = parse_bool(value, key);
  } else if (key == "separation") {
    cfg.enable_separation = parse_bool(value, key);
  } else if (key == "trials") {
    cfg.trials = parse_integer<long>(value, key);
  } else if (key == "seed") {
    cfg.master_seed = parse_integer<std::uint64_t>(value, key);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat `key = value` text, '#' comments, unknown keys rejected.
inline ScenarioConfig parse_config_text(const std::string& text, ScenarioConfig base = {}) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    apply_config_key(base, key, value);
  }
  return base;
}

inline ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

}  // namespace muvfdm
