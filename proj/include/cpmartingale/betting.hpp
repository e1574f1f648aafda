#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cpmartingale/math.hpp"

namespace cpm {

inline constexpr double kDensityFloor = 1e-6;
inline constexpr double kMixturePMin = 1e-12;
inline constexpr double kBandwidthFloor = 0.05;
inline constexpr char kDensityFileMagic[] = "cpmartingale-betting-density v1";

/// Two-piece density: bets that p-values go small after a change.
inline double constant_bet(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("constant_bet: p must be in [0, 1]");
  return p < 0.5 ? 1.5 : 0.5;
}

/// Closed form of integral_0^1 eps * p^(eps-1) d eps. With t = log p this
/// is (t - 1 + exp(-t)) / t^2, continued by its series at p = 1.
inline double mixture_bet(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("mixture_bet: p must be in [0, 1]");
  p = std::max(p, kMixturePMin);
  const double t = std::log(p);
  if (t > -1e-3) return 0.5 + t * (-1.0 / 6.0 + t * (1.0 / 24.0 - t / 120.0));
  return (t - 1.0 + std::exp(-t)) / (t * t);
}

/// Ring buffer of the most recent L p-values. Iteration order is
/// unspecified; the KDE is symmetric in its sample.
class PValueHistory {
 public:
  explicit PValueHistory(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("PValueHistory: capacity must be >= 1");
    buf_.reserve(capacity_);
  }

  void push(double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("PValueHistory: p must be in [0, 1]");
    if (buf_.size() < capacity_) {
      buf_.push_back(p);
    } else {
      buf_[next_] = p;
      next_ = (next_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return buf_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return buf_.empty(); }
  std::span<const double> raw() const { return buf_; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<double> buf_;
};

/// Silverman bandwidth 1.06 * sd * n^(-1/5) with a fixed floor; sd is the
/// sample standard deviation of the unreflected values.
inline double silverman_bandwidth(std::span<const double> sample) {
  const std::size_t n = sample.size();
  double sd = 0.0;
  if (n >= 2) {
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (double v : sample) acc += (v - mean) * (v - mean);
    sd = std::sqrt(acc / static_cast<double>(n - 1));
  }
  const double h = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
  return std::max(kBandwidthFloor, h);
}

/// Gaussian KDE over the sample tripled by reflection about 0 and 1,
/// evaluated at x. Weight 1/n per original point, so the [0,1] mass is
/// close to (but not exactly) one before renormalization.
inline double reflected_kde_raw(std::span<const double> sample, double h, double x) {
  const double inv_h = 1.0 / h;
  const double norm = 0.39894228040143267794 * inv_h / static_cast<double>(sample.size());
  double acc = 0.0;
  for (double p : sample) {
    const double a = (x - p) * inv_h;
    const double b = (x + p) * inv_h;
    const double c = (x - 2.0 + p) * inv_h;
    acc += std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b) + std::exp(-0.5 * c * c);
  }
  return acc * norm;
}

/// Exact integral over [0,1] of reflected_kde_raw. The three reflected
/// copies of a point p jointly carry mass Phi((1+p)/h) + Phi((2-p)/h) - 1
/// inside the unit interval.
inline double reflected_kde_mass01(std::span<const double> sample, double h) {
  const double inv_h = 1.0 / h;
  double acc = 0.0;
  for (double p : sample)
    acc += normal_cdf((1.0 + p) * inv_h) + normal_cdf((2.0 - p) * inv_h) - 1.0;
  return acc / static_cast<double>(sample.size());
}

/// Window KDE betting value at p for the given history: reflected KDE,
/// lifted by the density floor, renormalized to unit mass on [0,1].
/// An empty history falls back to the uniform density.
inline double kde_window_density(const PValueHistory& history, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("kde_window_density: p must be in [0, 1]");
  if (history.empty()) return 1.0;
  const auto sample = history.raw();
  const double h = silverman_bandwidth(sample);
  const double raw = reflected_kde_raw(sample, h, p);
  const double mass = reflected_kde_mass01(sample, h);
  return (raw + kDensityFloor) / (mass + kDensityFloor);
}

class BettingFunction {
 public:
  virtual ~BettingFunction() = default;
  /// Betting value g_n(p_n); stateful variants also record p_n.
  virtual double step(double p) = 0;
};

class ConstantBetting final : public BettingFunction {
 public:
  double step(double p) override { return constant_bet(p); }
};

class MixtureBetting final : public BettingFunction {
 public:
  double step(double p) override { return mixture_bet(p); }
};

class WindowKdeBetting final : public BettingFunction {
 public:
  explicit WindowKdeBetting(std::size_t window) : history_(window) {}

  double step(double p) override {
    const double g = kde_window_density(history_, p);
    history_.push(p);
    return g;
  }

  const PValueHistory& history() const { return history_; }

 private:
  PValueHistory history_;
};

/// Grid betting density on uniform [0,1] nodes with linear interpolation.
/// Instances are calibrated by construction: the trapezoid integral of
/// the grid is forced to one and re-verified when loading from a file.
class PrecomputedBetting final : public BettingFunction {
 public:
  explicit PrecomputedBetting(std::vector<double> grid) : grid_(std::move(grid)) {
    if (grid_.size() < 2) throw std::invalid_argument("PrecomputedBetting: grid needs >= 2 nodes");
    for (double v : grid_)
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("PrecomputedBetting: grid densities must be finite and >= 0");
    const double integral = trapezoid(grid_);
    if (std::abs(integral - 1.0) > 1e-6)
      throw std::invalid_argument("PrecomputedBetting: grid does not integrate to 1");
  }

  /// Fit the reflected KDE of the calibration p-values on a uniform grid,
  /// floor it, renormalize by the trapezoid rule.
  static PrecomputedBetting calibrate(std::span<const double> pvalues, std::size_t grid_size = 1001) {
    if (pvalues.empty()) throw std::invalid_argument("PrecomputedBetting: no calibration p-values");
    if (grid_size < 2) throw std::invalid_argument("PrecomputedBetting: grid_size must be >= 2");
    for (double p : pvalues)
      if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("PrecomputedBetting: calibration p-values must be in [0, 1]");
    const double h = silverman_bandwidth(pvalues);
    std::vector<double> grid(grid_size);
    const double dx = 1.0 / static_cast<double>(grid_size - 1);
    for (std::size_t j = 0; j < grid_size; ++j)
      grid[j] = std::max(reflected_kde_raw(pvalues, h, static_cast<double>(j) * dx), kDensityFloor);
    const double integral = trapezoid(grid);
    for (double& v : grid) v /= integral;
    return PrecomputedBetting(std::move(grid));
  }

  double density(double p) const {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("PrecomputedBetting: p must be in [0, 1]");
    const double u = p * static_cast<double>(grid_.size() - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(u), grid_.size() - 2);
    const double frac = u - static_cast<double>(lo);
    return grid_[lo] + frac * (grid_[lo + 1] - grid_[lo]);
  }

  double step(double p) override { return density(p); }

  std::size_t grid_size() const { return grid_.size(); }
  std::span<const double> grid() const { return grid_; }

  void save(std::ostream& out) const {
    out << kDensityFileMagic << "\n";
    out << "grid_size=" << grid_.size() << "\n";
    const double dx = 1.0 / static_cast<double>(grid_.size() - 1);
    char line[64];
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      std::snprintf(line, sizeof(line), "%.17g %.17g", static_cast<double>(j) * dx, grid_[j]);
      out << line << "\n";
    }
  }

  static PrecomputedBetting load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kDensityFileMagic)
      throw std::runtime_error("betting density file: bad magic line");
    if (!std::getline(in, line) || line.rfind("grid_size=", 0) != 0)
      throw std::runtime_error("betting density file: missing grid_size line");
    std::size_t n = 0;
    try {
      n = static_cast<std::size_t>(std::stoull(line.substr(10)));
    } catch (const std::exception&) {
      throw std::runtime_error("betting density file: unparsable grid_size");
    }
    if (n < 2) throw std::runtime_error("betting density file: grid_size must be >= 2");
    std::vector<double> grid(n);
    const double dx = 1.0 / static_cast<double>(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::getline(in, line))
        throw std::runtime_error("betting density file: truncated grid");
      std::istringstream ls(line);
      double p = 0.0, v = 0.0;
      if (!(ls >> p >> v)) throw std::runtime_error("betting density file: unparsable grid line");
      if (std::abs(p - static_cast<double>(j) * dx) > 1e-9)
        throw std::runtime_error("betting density file: grid nodes not uniform ascending");
      grid[j] = v;
    }
    const double integral = trapezoid(grid);
    if (std::abs(integral - 1.0) > 1e-6)
      throw std::runtime_error("betting density file: trapezoid integral differs from 1");
    return PrecomputedBetting(std::move(grid));
  }

 private:
  static double trapezoid(const std::vector<double>& grid) {
    const double dx = 1.0 / static_cast<double>(grid.size() - 1);
    double acc = 0.5 * (grid.front() + grid.back());
    for (std::size_t j = 1; j + 1 < grid.size(); ++j) acc += grid[j];
    return acc * dx;
  }

  std::vector<double> grid_;
};

struct BettingSpec {
  enum class Kind { constant, mixture, kde_window, precomputed };
  Kind kind = Kind::constant;
  std::size_t window = 100;
  std::size_t grid_size = 1001;
  std::shared_ptr<const PrecomputedBetting> density;  // required for precomputed

  void validate() const {
    if (kind == Kind::kde_window && window == 0)
      throw std::invalid_argument("BettingSpec: window must be >= 1");
    if (kind == Kind::precomputed && !density)
      throw std::invalid_argument("BettingSpec: precomputed betting needs a calibrated density");
  }
};

inline std::string betting_kind_name(BettingSpec::Kind kind) {
  switch (kind) {
    case BettingSpec::Kind::constant: return "constant";
    case BettingSpec::Kind::mixture: return "mixture";
    case BettingSpec::Kind::kde_window: return "kde-window";
    case BettingSpec::Kind::precomputed: return "precomputed";
  }
  return "?";
}

inline std::unique_ptr<BettingFunction> make_betting(const BettingSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case BettingSpec::Kind::constant: return std::make_unique<ConstantBetting>();
    case BettingSpec::Kind::mixture: return std::make_unique<MixtureBetting>();
    case BettingSpec::Kind::kde_window: return std::make_unique<WindowKdeBetting>(spec.window);
    case BettingSpec::Kind::precomputed: return std::make_unique<PrecomputedBetting>(*spec.density);
  }
  throw std::invalid_argument("make_betting: unknown betting kind");
}

}  // namespace cpm
