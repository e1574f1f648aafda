#pragma once

#include <algorithm>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpmartingale/martingale.hpp"
#include "cpmartingale/series.hpp"

namespace cpm {

/// Observation file format: one observation per line, comma- or
/// whitespace-separated decimal floats, '#' starts a comment. The first
/// data row fixes the dimension. Errors name the offending line.
inline Series parse_observations(std::istream& in) {
  Series series(1);
  bool have_dim = false;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    row.clear();
    double v = 0.0;
    while (ls >> v) row.push_back(v);
    if (!ls.eof())
      throw std::runtime_error("input line " + std::to_string(line_no) + ": unparsable value");
    if (row.empty()) continue;
    if (!have_dim) {
      series = Series(row.size());
      have_dim = true;
    } else if (row.size() != series.dim()) {
      throw std::runtime_error("input line " + std::to_string(line_no) + ": expected " +
                               std::to_string(series.dim()) + " values, got " +
                               std::to_string(row.size()));
    }
    try {
      series.push(std::span<const double>(row));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("input line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return series;
}

/// Trace CSV columns n,z,alpha,p,log_S,C. Multi-dimensional observations
/// print the z column as ';'-joined coordinates.
inline void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "n,z,alpha,p,log_S,C\n";
  char buf[192];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g", r.n, r.z, r.alpha, r.p,
                  r.log_s, r.cut);
    out << buf << "\n";
  }
}

}  // namespace cpm
