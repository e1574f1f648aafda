#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cpmartingale/betting.hpp"
#include "cpmartingale/ncm.hpp"
#include "cpmartingale/rng.hpp"
#include "cpmartingale/score_buffer.hpp"
#include "cpmartingale/series.hpp"

namespace cpm {

/// Conformal p-value (#{alpha_i > alpha_n} + u * #{alpha_i = alpha_n}) / n.
/// The buffer must already contain alpha_n, so the tie count includes the
/// current observation and the result is positive whenever u > 0.
inline double conformal_pvalue(const ScoreBuffer& buffer, double alpha_n, double u) {
  if (buffer.empty()) throw std::invalid_argument("conformal_pvalue: empty score buffer");
  if (u < 0.0 || u > 1.0) throw std::invalid_argument("conformal_pvalue: u must be in [0, 1]");
  const auto rc = buffer.rank_counts(alpha_n);
  return (static_cast<double>(rc.greater) + u * static_cast<double>(rc.equal)) /
         static_cast<double>(buffer.size());
}

/// Running martingale log value and its cut statistic
/// C_n = max(0, C_{n-1} + log g_n(p_n)). The running minimum of log S is
/// kept separately so the identity C_n = log S_n - min_{i<=n} log S_i can
/// be cross-checked.
struct IcmState {
  double log_s = 0.0;
  double cut = 0.0;
  double min_log_s = 0.0;
  std::size_t n = 0;
};

inline void icm_step(IcmState& state, double g_value) {
  if (!(g_value > 0.0)) throw std::invalid_argument("icm_step: betting value must be positive");
  const double log_g = std::log(g_value);
  state.log_s += log_g;
  state.cut = std::max(0.0, state.cut + log_g);
  state.min_log_s = std::min(state.min_log_s, state.log_s);
  ++state.n;
  assert(std::abs(state.cut - (state.log_s - state.min_log_s)) < 1e-9);
}

struct TraceRow {
  std::size_t n;
  double z;
  double alpha;
  double p;
  double log_s;
  double cut;
};

struct AlarmResult {
  std::optional<std::size_t> tau;  // first step with statistic >= h (1-based)
  std::vector<TraceRow> trace;
};

/// Inductive conformal martingale detector: score against the training
/// set, rank among the stream scores seen so far, bet on the p-value.
class IcmDetector {
 public:
  IcmDetector(std::unique_ptr<Ncm> ncm, std::unique_ptr<BettingFunction> betting, RngHandle rng)
      : ncm_(std::move(ncm)), betting_(std::move(betting)), rng_(std::move(rng)) {}

  /// Consumes one observation, returns the cut statistic C_n.
  double step(std::span<const double> z) {
    last_alpha_ = ncm_->score(z);
    scores_.insert(last_alpha_);
    last_p_ = conformal_pvalue(scores_, last_alpha_, rng_.uniform_open01());
    icm_step(state_, betting_->step(last_p_));
    return state_.cut;
  }

  const IcmState& state() const { return state_; }
  double log_martingale() const { return state_.log_s; }
  double last_alpha() const { return last_alpha_; }
  double last_pvalue() const { return last_p_; }

 private:
  std::unique_ptr<Ncm> ncm_;
  std::unique_ptr<BettingFunction> betting_;
  RngHandle rng_;
  ScoreBuffer scores_;
  IcmState state_;
  double last_alpha_ = 0.0;
  double last_p_ = 0.0;
};

/// Original (transductive) conformal martingale with the mean-distance
/// NCM: every score is recomputed against the leave-one-out mean of all
/// current observations, in O(n) per step via the running sum.
class FullCmDetector {
 public:
  FullCmDetector(std::unique_ptr<BettingFunction> betting, RngHandle rng)
      : betting_(std::move(betting)), rng_(std::move(rng)) {}

  double step(std::span<const double> z) {
    if (z.size() != 1) throw std::invalid_argument("FullCmDetector: 1-D observations required");
    values_.push_back(z[0]);
    total_ += z[0];
    const std::size_t n = values_.size();

    const double alpha_n = loo_score(n - 1);
    std::size_t greater = 0, equal = 1;  // alpha_n ties with itself
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double a = loo_score(i);
      if (a > alpha_n) ++greater;
      else if (a == alpha_n) ++equal;
    }
    last_alpha_ = alpha_n;
    const double u = rng_.uniform_open01();
    last_p_ = (static_cast<double>(greater) + u * static_cast<double>(equal)) /
              static_cast<double>(n);
    icm_step(state_, betting_->step(last_p_));
    return state_.cut;
  }

  const IcmState& state() const { return state_; }
  double log_martingale() const { return state_.log_s; }
  double last_alpha() const { return last_alpha_; }
  double last_pvalue() const { return last_p_; }

 private:
  double loo_score(std::size_t i) const {
    const std::size_t n = values_.size();
    if (n == 1) return 0.0;  // a single observation only ties with itself
    const double mean_others = (total_ - values_[i]) / static_cast<double>(n - 1);
    return std::abs(values_[i] - mean_others);
  }

  std::unique_ptr<BettingFunction> betting_;
  RngHandle rng_;
  std::vector<double> values_;
  double total_ = 0.0;
  IcmState state_;
  double last_alpha_ = 0.0;
  double last_p_ = 0.0;
};

namespace detail {

template <class Detector>
AlarmResult run_to_alarm(Detector& det, const Series& stream, double h, bool record_trace) {
  AlarmResult result;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const double stat = det.step(stream.at(i));
    if (record_trace)
      result.trace.push_back(TraceRow{i + 1, stream.at(i)[0], det.last_alpha(), det.last_pvalue(),
                                      det.log_martingale(), stat});
    if (stat >= h) {
      result.tau = i + 1;
      break;
    }
  }
  return result;
}

}  // namespace detail

/// Algorithm loop: alarm at the first n with C_n >= h, or none if the
/// stream ends first.
inline AlarmResult run_icm(TrainingSet train, const Series& stream, const NcmConfig& ncm,
                           const BettingSpec& betting, double h, RngHandle rng,
                           bool record_trace = false) {
  IcmDetector det(make_ncm(ncm, std::move(train)), make_betting(betting), std::move(rng));
  return detail::run_to_alarm(det, stream, h, record_trace);
}

/// Reference transductive variant of the loop (mean-distance NCM).
inline AlarmResult run_full_cm(const Series& stream, const BettingSpec& betting, double h,
                               RngHandle rng, bool record_trace = false) {
  FullCmDetector det(make_betting(betting), std::move(rng));
  return detail::run_to_alarm(det, stream, h, record_trace);
}

/// The p-value pass of the loop alone, without betting: score, insert,
/// rank. Used for calibration and the uniformity checks.
inline std::vector<double> icm_pvalues(TrainingSet train, const Series& stream,
                                       const NcmConfig& ncm, RngHandle rng) {
  auto scorer = make_ncm(ncm, std::move(train));
  ScoreBuffer buffer;
  std::vector<double> ps;
  ps.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const double alpha = scorer->score(stream.at(i));
    buffer.insert(alpha);
    ps.push_back(conformal_pvalue(buffer, alpha, rng.uniform_open01()));
  }
  return ps;
}

}  // namespace cpm
