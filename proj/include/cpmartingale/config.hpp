#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpmartingale/detector.hpp"
#include "cpmartingale/simulate.hpp"

namespace cpm {

/// Flat key-value configuration: `key = value` lines, '#' comments.
/// Typed getters record which keys were consumed so that unknown keys can
/// be rejected wholesale after parsing.
class ConfigMap {
 public:
  static ConfigMap parse(std::istream& in) {
    ConfigMap cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double(key, it->second);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "': expected unsigned integer, got '" +
                               it->second + "'");
    }
  }

  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const {
    touched_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::string item;
    std::istringstream ls(it->second);
    while (std::getline(ls, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw std::runtime_error("config key '" + key + "': empty list");
    return out;
  }

  /// Rejects any key never consumed by a getter.
  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (touched_.count(key) == 0)
        throw std::runtime_error("unknown config key '" + key + "'");
  }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  static double parse_double(const std::string& key, const std::string& text) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "': expected number, got '" + text + "'");
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> touched_;
};

/// Fully validated CLI options shared by the subcommands. The precomputed
/// betting density is referenced by file name here and loaded by the
/// command that needs it.
struct CliOptions {
  DetectorSpec detector;
  std::string density_file;
  std::size_t m = 200;
  std::size_t theta = 100;
  double mu1 = 1.0;
  std::size_t horizon = 0;
  std::size_t replications = 2000;
  std::vector<double> h_grid;  // empty -> family default
  double h = 4.0;              // detect threshold
  std::uint64_t seed = 1729;
  std::size_t jobs = 1;
  std::size_t train_rows = 0;  // detect: leading input rows used as training
  std::vector<double> target_fa{0.05, 0.10};
  std::size_t grid_size = 1001;
  std::size_t calib_length = 1000;
  std::size_t calib_theta = 500;
  double calib_mu1 = 1.0;

  ExperimentConfig experiment() const {
    ExperimentConfig cfg;
    cfg.m = m;
    cfg.theta = theta;
    cfg.mu1 = mu1;
    cfg.horizon = horizon;
    cfg.replications = replications;
    cfg.h_grid = h_grid;
    cfg.detector = detector;
    cfg.seed = seed;
    cfg.jobs = jobs;
    return cfg;
  }
};

inline DetectorSpec::Family parse_detector_family(const std::string& name) {
  if (name == "icm") return DetectorSpec::Family::icm;
  if (name == "full-cm") return DetectorSpec::Family::full_cm;
  if (name == "cusum") return DetectorSpec::Family::cusum;
  if (name == "sr") return DetectorSpec::Family::sr;
  if (name == "pp") return DetectorSpec::Family::pp;
  if (name == "oracle-cusum") return DetectorSpec::Family::oracle_cusum;
  if (name == "oracle-sr") return DetectorSpec::Family::oracle_sr;
  if (name == "oracle-pp") return DetectorSpec::Family::oracle_pp;
  throw std::runtime_error("unknown detector '" + name + "'");
}

inline NcmConfig::Kind parse_ncm_kind(const std::string& name) {
  if (name == "knn") return NcmConfig::Kind::knn;
  if (name == "lr-gaussian") return NcmConfig::Kind::lr_gaussian;
  if (name == "mean-distance") return NcmConfig::Kind::mean_distance;
  throw std::runtime_error("unknown ncm '" + name + "'");
}

inline BettingSpec::Kind parse_betting_kind(const std::string& name) {
  if (name == "constant") return BettingSpec::Kind::constant;
  if (name == "mixture") return BettingSpec::Kind::mixture;
  if (name == "kde-window") return BettingSpec::Kind::kde_window;
  if (name == "precomputed") return BettingSpec::Kind::precomputed;
  throw std::runtime_error("unknown betting '" + name + "'");
}

/// Validates every recognized key and rejects the rest. Values arriving
/// from command-line flags should be set on the map before this call so
/// flags and file entries share one validation path.
inline CliOptions parse_cli_options(const ConfigMap& cfg) {
  CliOptions opt;
  opt.detector.family = parse_detector_family(cfg.get_string("detector", "icm"));
  opt.detector.ncm.kind = parse_ncm_kind(cfg.get_string("ncm", "lr-gaussian"));
  opt.detector.ncm.k = cfg.get_u64("knn_k", 7);
  opt.detector.ncm.lr.mu_r = cfg.get_double("lr_mu_r", 1.0);
  opt.detector.ncm.lr.sigma2 = cfg.get_double("lr_sigma2", 1.0);
  opt.detector.ncm.lr.sigma2_r = cfg.get_double("lr_sigma2_r", 1.0);
  opt.detector.ncm.lr.validate();
  opt.detector.betting.kind = parse_betting_kind(cfg.get_string("betting", "constant"));
  opt.detector.betting.window = cfg.get_u64("kde_window", 100);
  opt.detector.model.mu0 = cfg.get_double("model_mu0", 0.0);
  opt.detector.model.mu1 = cfg.get_double("model_mu1", 1.0);
  opt.detector.model.sigma2 = cfg.get_double("model_sigma2", 1.0);
  opt.detector.model.validate();
  opt.detector.geom_p = cfg.get_double("geom_p", 0.01);
  if (!(opt.detector.geom_p > 0.0 && opt.detector.geom_p < 1.0))
    throw std::runtime_error("config key 'geom_p': must be in (0, 1)");

  opt.density_file = cfg.get_string("density_file", "");
  opt.m = cfg.get_u64("m", 200);
  opt.theta = cfg.get_u64("theta", 100);
  opt.mu1 = cfg.get_double("mu1", 1.0);
  opt.horizon = cfg.get_u64("horizon", 0);
  opt.replications = cfg.get_u64("replications", 2000);
  opt.h = cfg.get_double("h", 4.0);
  opt.seed = cfg.get_u64("seed", 1729);
  opt.jobs = cfg.get_u64("jobs", 1);
  opt.train_rows = cfg.get_u64("train_rows", 0);
  opt.target_fa = cfg.get_double_list("target_fa", {0.05, 0.10});
  for (double fa : opt.target_fa)
    if (!(fa > 0.0 && fa < 1.0))
      throw std::runtime_error("config key 'target_fa': entries must be in (0, 1)");
  opt.grid_size = cfg.get_u64("grid_size", 1001);
  if (opt.grid_size < 2) throw std::runtime_error("config key 'grid_size': must be >= 2");
  opt.calib_length = cfg.get_u64("calib_length", 1000);
  opt.calib_theta = cfg.get_u64("calib_theta", 500);
  opt.calib_mu1 = cfg.get_double("calib_mu1", 1.0);

  const double h_min = cfg.get_double("h_min", 0.0);
  const double h_max = cfg.get_double("h_max", 0.0);
  const std::uint64_t h_count = cfg.get_u64("h_count", 0);
  if ((h_min != 0.0 || h_max != 0.0 || h_count != 0)) {
    if (!(h_min > 0.0 && h_max > h_min && h_count >= 2))
      throw std::runtime_error("h_min/h_max/h_count: need 0 < h_min < h_max and h_count >= 2");
    opt.h_grid.resize(h_count);
    const double step = std::log(h_max / h_min) / static_cast<double>(h_count - 1);
    for (std::size_t i = 0; i < h_count; ++i)
      opt.h_grid[i] = h_min * std::exp(step * static_cast<double>(i));
  }

  cfg.reject_unknown();
  return opt;
}

}  // namespace cpm
