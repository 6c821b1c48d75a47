#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "experiment.hpp"

namespace muvfdm {

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Dpc: return "dpc";
    case Scheme::Ribf: return "ribf";
    case Scheme::Mf: return "mf";
    case Scheme::Separation: return "separation";
  }
  return "?";
}

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::Macro: return "macro";
    case Tier::Small: return "small";
    case Tier::Total: return "total";
  }
  return "?";
}

namespace detail {

/// 17 significant digits: enough for a bit-faithful double round trip.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kCsvHeader =
    "snr_db,scheme,tier,tau_fraction,beta,K,mean_rate_bps,stderr_bps,trials,resamples,seed";

inline std::string to_csv(const std::vector<SweepResult>& results) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const auto& result : results) {
    const double beta = result.config.load_rate().value();
    for (const auto& row : result.rows) {
      os << detail::fmt17(row.point.snr_db) << ',' << scheme_name(row.point.scheme) << ','
         << tier_name(row.point.tier) << ',' << detail::fmt17(row.point.tau_fraction) << ','
         << detail::fmt17(beta) << ',' << result.config.sbs_count << ','
         << detail::fmt17(row.mean_rate_bps) << ',' << detail::fmt17(row.stderr_bps) << ','
         << row.trials_used << ',' << row.resamples << ',' << result.config.master_seed << "\n";
    }
  }
  return os.str();
}

inline nlohmann::json config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  for (const auto& [key, value] : config_items(cfg)) j[key] = value;
  return j;
}

inline std::string to_json(const std::vector<SweepResult>& results) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& result : results) {
    nlohmann::json entry;
    entry["config"] = config_to_json(result.config);
    entry["config_hash"] = result.config_hash;
    entry["beta"] = result.config.load_rate().value();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.rows) {
      rows.push_back({{"snr_db", row.point.snr_db},
                      {"scheme", scheme_name(row.point.scheme)},
                      {"tier", tier_name(row.point.tier)},
                      {"tau_fraction", row.point.tau_fraction},
                      {"beta", result.config.load_rate().value()},
                      {"K", result.config.sbs_count},
                      {"mean_rate_bps", row.mean_rate_bps},
                      {"stderr_bps", row.stderr_bps},
                      {"trials", row.trials_used},
                      {"resamples", row.resamples},
                      {"seed", result.config.master_seed}});
    }
    entry["rows"] = std::move(rows);
    doc.push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

/// Typed view of one emitted CSV record.
struct CsvRecord {
  double snr_db = 0.0;
  std::string scheme;
  std::string tier;
  double tau_fraction = 0.0;
  double beta = 0.0;
  int sbs_count = 0;
  double mean_rate_bps = 0.0;
  double stderr_bps = 0.0;
  long trials = 0;
  long resamples = 0;
  std::uint64_t seed = 0;
};

inline std::vector<CsvRecord> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
  if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header: " + line);
  std::vector<CsvRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 11) throw std::runtime_error("malformed CSV row: " + line);
    CsvRecord r;
    r.snr_db = std::stod(fields[0]);
    r.scheme = fields[1];
    r.tier = fields[2];
    r.tau_fraction = std::stod(fields[3]);
    r.beta = std::stod(fields[4]);
    r.sbs_count = std::stoi(fields[5]);
    r.mean_rate_bps = std::stod(fields[6]);
    r.stderr_bps = std::stod(fields[7]);
    r.trials = std::stol(fields[8]);
    r.resamples = std::stol(fields[9]);
    r.seed = static_cast<std::uint64_t>(std::stoull(fields[10]));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace muvfdm
