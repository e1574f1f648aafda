#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "cpmartingale/detector.hpp"
#include "cpmartingale/rng.hpp"
#include "cpmartingale/series.hpp"

namespace cpm {

/// One Monte Carlo experiment: detector, change model, replication count,
/// threshold grid. A change index beyond the horizon means "no change".
struct ExperimentConfig {
  std::size_t m = 200;             // training size
  std::size_t theta = 100;         // true change index (1-based)
  double mu1 = 1.0;                // post-change mean
  std::size_t horizon = 0;         // 0 -> theta + 2500
  std::size_t replications = 2000;
  std::vector<double> h_grid;      // ascending; empty -> family default
  DetectorSpec detector;
  std::uint64_t seed = 1729;
  std::size_t jobs = 1;            // 0 -> hardware concurrency

  std::size_t effective_horizon() const { return horizon != 0 ? horizon : theta + 2500; }

  void validate() const {
    if (m == 0) throw std::invalid_argument("ExperimentConfig: m must be >= 1");
    if (theta == 0) throw std::invalid_argument("ExperimentConfig: theta must be >= 1");
    if (replications == 0) throw std::invalid_argument("ExperimentConfig: replications must be >= 1");
    const std::size_t h = effective_horizon();
    if (h == 0) throw std::invalid_argument("ExperimentConfig: horizon must be >= 1");
    // theta > horizon encodes "no change"; otherwise the change must be observable
    if (h == theta) throw std::invalid_argument("ExperimentConfig: horizon must exceed theta");
    for (std::size_t i = 1; i < h_grid.size(); ++i)
      if (!(h_grid[i] > h_grid[i - 1]))
        throw std::invalid_argument("ExperimentConfig: h grid must be strictly ascending");
  }
};

struct Realization {
  Series training;
  Series stream;
  RngHandle rng;  // positioned after the data draws; feeds the detector
};

/// Training ~ f0, stream with the mean shift at theta. Deterministic in
/// (seed, rep): each replication owns substream(rep) and draws training
/// first, then the stream, so matched replications share data across
/// detector families.
inline Realization generate_realization(const ExperimentConfig& cfg, std::size_t rep) {
  RngHandle rng = RngHandle(cfg.seed).substream(rep);
  Series training(1);
  for (std::size_t i = 0; i < cfg.m; ++i) training.push(rng.normal(0.0, 1.0));
  Series stream(1);
  const std::size_t horizon = cfg.effective_horizon();
  for (std::size_t i = 1; i <= horizon; ++i)
    stream.push(rng.normal(i >= cfg.theta ? cfg.mu1 : 0.0, 1.0));
  return Realization{std::move(training), std::move(stream), std::move(rng)};
}

struct SweepRow {
  double h = 0.0;
  double fa_prob = 0.0;     // fraction of runs with tau <= theta
  double mean_delay = 0.0;  // mean of tau - theta over tau > theta; NaN if none
  double delay_se = 0.0;    // standard error of that mean; NaN if n_delay < 2
  std::size_t n_runs = 0;
  std::size_t n_delay = 0;  // uncensored runs with tau > theta
  std::size_t n_censored = 0;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<double> h_grid;
  std::vector<SweepRow> rows;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Default 60-point log-spaced threshold grid per detector family, spanning
/// roughly false-alarm probabilities 0.5 down to below 0.01 at theta = 100.
inline std::vector<double> default_h_grid(DetectorSpec::Family family, std::size_t points = 60) {
  double lo = 0.25, hi = 8.0;
  switch (family) {
    case DetectorSpec::Family::icm:
    case DetectorSpec::Family::full_cm: lo = 0.2; hi = 8.0; break;
    case DetectorSpec::Family::cusum: lo = 0.25; hi = 8.0; break;
    case DetectorSpec::Family::sr: lo = 2.0; hi = 13.0; break;
    case DetectorSpec::Family::pp: lo = 0.25; hi = 9.0; break;
    case DetectorSpec::Family::oracle_cusum: lo = 0.5; hi = 9.0; break;
    case DetectorSpec::Family::oracle_sr: lo = 2.0; hi = 13.0; break;
    case DetectorSpec::Family::oracle_pp: lo = 0.25; hi = 10.0; break;
  }
  std::vector<double> grid(points);
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo * std::exp(step * static_cast<double>(i));
  return grid;
}

namespace detail {

/// Stopping times for every grid threshold from one statistic trajectory.
/// tau(h) is nondecreasing in h, so a single pass with a moving grid index
/// reads all of them off; the stream stops once the top threshold is hit.
class ThresholdSweep {
 public:
  explicit ThresholdSweep(std::span<const double> grid) : grid_(grid), tau_(grid.size(), 0) {}

  bool done() const { return idx_ == grid_.size(); }

  void observe(double stat, std::size_t step_index) {
    while (idx_ < grid_.size() && stat >= grid_[idx_]) tau_[idx_++] = step_index;
  }

  const std::vector<std::size_t>& tau() const { return tau_; }  // 0 = censored

 private:
  std::span<const double> grid_;
  std::size_t idx_ = 0;
  std::vector<std::size_t> tau_;
};

}  // namespace detail

/// Per-threshold aggregates from the stopping times of all replications;
/// tau = 0 marks a censored run (no alarm by the horizon). Alarms at or
/// before theta are false alarms; the delay mean is conditional on
/// tau > theta and excludes censored runs.
inline SweepRow summarize_taus(std::span<const std::size_t> taus, std::size_t theta, double h) {
  SweepRow row;
  row.h = h;
  row.n_runs = taus.size();
  double sum = 0.0, sum_sq = 0.0;
  std::size_t false_alarms = 0;
  for (std::size_t t : taus) {
    if (t == 0) {
      ++row.n_censored;
    } else if (t <= theta) {
      ++false_alarms;
    } else {
      const double d = static_cast<double>(t - theta);
      sum += d;
      sum_sq += d * d;
      ++row.n_delay;
    }
  }
  row.fa_prob = static_cast<double>(false_alarms) / static_cast<double>(row.n_runs);
  if (row.n_delay > 0) {
    row.mean_delay = sum / static_cast<double>(row.n_delay);
    if (row.n_delay > 1) {
      const double var = (sum_sq - sum * sum / static_cast<double>(row.n_delay)) /
                         static_cast<double>(row.n_delay - 1);
      row.delay_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(row.n_delay));
    } else {
      row.delay_se = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    row.mean_delay = std::numeric_limits<double>::quiet_NaN();
    row.delay_se = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

/// Monte Carlo sweep: one detector pass per replication, stopping times
/// for the whole threshold grid via the running-maximum readout, then
/// per-threshold false-alarm / delay aggregates.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  SweepResult result;
  result.config = cfg;
  result.h_grid = cfg.h_grid.empty() ? default_h_grid(cfg.detector.family) : cfg.h_grid;

  const std::size_t reps = cfg.replications;
  const std::size_t k = result.h_grid.size();
  const std::size_t horizon = cfg.effective_horizon();
  std::vector<std::size_t> tau(reps * k, 0);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> completed{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto run_one = [&](std::size_t rep) {
    Realization data = generate_realization(cfg, rep);
    std::optional<TrainingSet> training;
    if (cfg.detector.uses_training()) training.emplace(std::move(data.training), data.rng);
    auto det = make_detector(cfg.detector, std::move(training), data.rng);
    detail::ThresholdSweep sweep(result.h_grid);
    for (std::size_t i = 0; i < horizon && !sweep.done(); ++i)
      sweep.observe(det->step(data.stream.at(i)), i + 1);
    std::copy(sweep.tau().begin(), sweep.tau().end(), tau.begin() + rep * k);
  };

  std::size_t jobs = cfg.jobs != 0 ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, reps);
  auto worker = [&] {
    for (std::size_t rep; (rep = next.fetch_add(1)) < reps;) {
      try {
        run_one(rep);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
      const std::size_t done = completed.fetch_add(1) + 1;
      if (progress && (done % 200 == 0 || done == reps)) {
        std::lock_guard<std::mutex> lock(err_mutex);
        progress(done, reps);
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  result.rows.resize(k);
  std::vector<std::size_t> column(reps);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t rep = 0; rep < reps; ++rep) column[rep] = tau[rep * k + j];
    result.rows[j] = summarize_taus(column, cfg.theta, result.h_grid[j]);
  }
  return result;
}

/// Substream index reserved for betting-density calibration, so the
/// calibration realization never coincides with a replication stream.
inline constexpr std::uint64_t kCalibrationSubstream = 0xCA11B5EEDULL;

/// Calibration recipe for the precomputed betting density: one dedicated
/// realization with a change point, the ICM p-value pass, a reflected KDE
/// fit on all of its p-values.
inline PrecomputedBetting calibrate_precomputed_recipe(const NcmConfig& ncm, std::size_t m,
                                                       std::size_t length, std::size_t theta,
                                                       double mu1, std::size_t grid_size,
                                                       RngHandle rng) {
  if (length < 10) throw std::invalid_argument("calibration stream must have at least 10 observations");
  Series training(1);
  for (std::size_t i = 0; i < m; ++i) training.push(rng.normal(0.0, 1.0));
  Series stream(1);
  for (std::size_t i = 1; i <= length; ++i)
    stream.push(rng.normal(i >= theta ? mu1 : 0.0, 1.0));
  TrainingSet train(std::move(training), rng);
  const auto ps = icm_pvalues(std::move(train), stream, ncm, rng);
  return PrecomputedBetting::calibrate(ps, grid_size);
}

struct FaDelay {
  double delay = 0.0;
  double se = 0.0;
};

/// Linear interpolation of mean delay between the adjacent thresholds
/// whose false-alarm probabilities bracket the target. Throws when the
/// target is not bracketed by rows with delay data.
inline FaDelay interpolate_at_fa(const SweepResult& sweep, double target_fa) {
  const auto& rows = sweep.rows;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = rows[i + 1];
    if (std::isnan(a.mean_delay) || std::isnan(b.mean_delay)) continue;
    if (a.fa_prob >= target_fa && target_fa >= b.fa_prob) {
      if (a.fa_prob == b.fa_prob) return FaDelay{a.mean_delay, a.delay_se};
      const double t = (a.fa_prob - target_fa) / (a.fa_prob - b.fa_prob);
      return FaDelay{a.mean_delay + t * (b.mean_delay - a.mean_delay),
                     a.delay_se + t * (b.delay_se - a.delay_se)};
    }
  }
  throw std::runtime_error("interpolate_at_fa: target false-alarm probability not bracketed");
}

/// Sweep wrapper that widens the threshold grid (keeping its resolution)
/// until all target false-alarm levels are bracketed.
inline SweepResult run_sweep_bracketing(ExperimentConfig cfg, std::span<const double> targets,
                                        int max_retries = 3, const ProgressFn& progress = {}) {
  if (cfg.h_grid.empty()) cfg.h_grid = default_h_grid(cfg.detector.family);
  for (int attempt = 0;; ++attempt) {
    SweepResult sweep = run_sweep(cfg, progress);
    bool ok = true;
    for (double t : targets) {
      try {
        (void)interpolate_at_fa(sweep, t);
      } catch (const std::runtime_error&) {
        ok = false;
        break;
      }
    }
    if (ok || attempt >= max_retries) return sweep;
    const double lo = cfg.h_grid.front() / 4.0;
    const double hi = cfg.h_grid.back() * 2.0;
    const std::size_t points = cfg.h_grid.size() + cfg.h_grid.size() / 2;
    cfg.h_grid.assign(points, 0.0);
    const double step = std::log(hi / lo) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
      cfg.h_grid[i] = lo * std::exp(step * static_cast<double>(i));
  }
}

}  // namespace cpm
