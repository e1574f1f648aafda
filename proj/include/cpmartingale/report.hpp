#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cpmartingale/ncm.hpp"
#include "cpmartingale/simulate.hpp"

namespace cpm {

inline constexpr char kResultsCsvHeader[] =
    "detector,ncm,betting,theta,mu1,h,fa_prob,mean_delay,n_runs,n_censored,seed";

/// One (configuration, threshold) row of a results CSV.
struct ResultRow {
  std::string detector;
  std::string ncm;
  std::string betting;
  std::size_t theta = 0;
  double mu1 = 0.0;
  double h = 0.0;
  double fa_prob = 0.0;
  double mean_delay = 0.0;  // NaN when no run alarmed after theta
  std::size_t n_runs = 0;
  std::size_t n_censored = 0;
  std::uint64_t seed = 0;
};

inline std::vector<ResultRow> to_result_rows(const SweepResult& sweep) {
  const auto& cfg = sweep.config;
  std::vector<ResultRow> rows;
  rows.reserve(sweep.rows.size());
  for (const auto& r : sweep.rows) {
    ResultRow row;
    row.detector = detector_family_name(cfg.detector.family);
    row.ncm = cfg.detector.uses_training() ? ncm_kind_name(cfg.detector.ncm.kind)
              : cfg.detector.family == DetectorSpec::Family::full_cm ? "mean-distance"
                                                                     : "none";
    row.betting = cfg.detector.uses_betting() ? betting_kind_name(cfg.detector.betting.kind) : "none";
    row.theta = cfg.theta;
    row.mu1 = cfg.mu1;
    row.h = r.h;
    row.fa_prob = r.fa_prob;
    row.mean_delay = r.mean_delay;
    row.n_runs = r.n_runs;
    row.n_censored = r.n_censored;
    row.seed = cfg.seed;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << kResultsCsvHeader << "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%s,%zu,%.10g,%.10g,%.10g,%.10g,%zu,%zu,%llu",
                  r.detector.c_str(), r.ncm.c_str(), r.betting.c_str(), r.theta, r.mu1, r.h,
                  r.fa_prob, r.mean_delay, r.n_runs, r.n_censored,
                  static_cast<unsigned long long>(r.seed));
    out << buf << "\n";
  }
}

inline std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("results CSV: empty file");
  if (line != kResultsCsvHeader) {
    // name the first missing column for the error message
    std::istringstream expected(kResultsCsvHeader), got(line);
    std::string ecol, gcol;
    while (std::getline(expected, ecol, ',')) {
      if (!std::getline(got, gcol, ',') || gcol != ecol)
        throw std::runtime_error("results CSV: missing or misnamed column '" + ecol + "'");
    }
    throw std::runtime_error("results CSV: unexpected header");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 11)
      throw std::runtime_error("results CSV: line " + std::to_string(line_no) +
                               ": expected 11 fields");
    try {
      ResultRow r;
      r.detector = fields[0];
      r.ncm = fields[1];
      r.betting = fields[2];
      r.theta = std::stoull(fields[3]);
      r.mu1 = std::stod(fields[4]);
      r.h = std::stod(fields[5]);
      r.fa_prob = std::stod(fields[6]);
      r.mean_delay = std::stod(fields[7]);
      r.n_runs = std::stoull(fields[8]);
      r.n_censored = std::stoull(fields[9]);
      r.seed = std::stoull(fields[10]);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw std::runtime_error("results CSV: line " + std::to_string(line_no) +
                               ": unparsable field");
    }
  }
  return rows;
}

/// (detector, ncm, betting, theta, mu1) key of one operating curve.
using CurveKey = std::tuple<std::string, std::string, std::string, std::size_t, double>;

struct OperatingCurve {
  CurveKey key;
  std::vector<double> h, fa, delay;  // ordered by ascending h
};

inline std::map<CurveKey, OperatingCurve> group_curves(std::span<const ResultRow> rows) {
  std::map<CurveKey, OperatingCurve> curves;
  for (const auto& r : rows) {
    CurveKey key{r.detector, r.ncm, r.betting, r.theta, r.mu1};
    auto& c = curves[key];
    c.key = key;
    c.h.push_back(r.h);
    c.fa.push_back(r.fa_prob);
    c.delay.push_back(r.mean_delay);
  }
  for (auto& [key, c] : curves) {
    std::vector<std::size_t> order(c.h.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.h[a] < c.h[b]; });
    OperatingCurve sorted;
    sorted.key = key;
    for (std::size_t i : order) {
      sorted.h.push_back(c.h[i]);
      sorted.fa.push_back(c.fa[i]);
      sorted.delay.push_back(c.delay[i]);
    }
    c = std::move(sorted);
  }
  return curves;
}

/// Linear interpolation of delay at a target false-alarm probability on
/// one curve; std::nullopt when the target is not bracketed.
inline std::optional<double> curve_delay_at_fa(const OperatingCurve& c, double target_fa) {
  for (std::size_t i = 0; i + 1 < c.fa.size(); ++i) {
    if (std::isnan(c.delay[i]) || std::isnan(c.delay[i + 1])) continue;
    if (c.fa[i] >= target_fa && target_fa >= c.fa[i + 1]) {
      if (c.fa[i] == c.fa[i + 1]) return c.delay[i];
      const double t = (c.fa[i] - target_fa) / (c.fa[i] - c.fa[i + 1]);
      return c.delay[i] + t * (c.delay[i + 1] - c.delay[i]);
    }
  }
  return std::nullopt;
}

}  // namespace cpm
