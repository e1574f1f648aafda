#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cpmartingale/math.hpp"
#include "cpmartingale/prefix_moments.hpp"

namespace cpm {

/// Log marginal likelihood of a unit-variance Gaussian segment under a
/// standard normal prior on its mean:
///   log int prod_i N(z_i | mu, 1) N(mu | 0, 1) dmu
///     = -(len/2) log 2pi - (1/2) log(len + 1) - (1/2) [S2 - S1^2/(len + 1)].
/// An empty segment integrates the prior to exactly one.
inline double log_marginal_gaussian(double s1, double s2, std::size_t len) {
  if (len == 0) return 0.0;
  const double l = static_cast<double>(len);
  return -l * kHalfLog2Pi - 0.5 * std::log(l + 1.0) - 0.5 * (s2 - s1 * s1 / (l + 1.0));
}

/// Sequential state for the Bayesian oracle detectors: prefix moments of
/// the stream plus cached prefix marginals, supporting an O(n) scan over
/// all change candidates at each step.
class OracleState {
 public:
  void push(double z) {
    moments_.push(z);
    const std::size_t n = moments_.size();
    log_m_prefix_.push_back(
        log_marginal_gaussian(moments_.segment_sum(1, n), moments_.segment_sum_sq(1, n), n));
    if (log_len_.size() < n + 2) {
      const std::size_t old = log_len_.size();
      log_len_.resize(n + 2);
      for (std::size_t k = old; k < log_len_.size(); ++k)
        log_len_[k] = std::log(static_cast<double>(k));
    }
  }

  std::size_t size() const { return moments_.size(); }
  const PrefixMoments& moments() const { return moments_; }

  /// log marginal of observations from..to (1-based, empty allowed).
  double log_marginal_nocp(std::size_t from, std::size_t to) const {
    if (from > to) return 0.0;
    return log_marginal_gaussian(moments_.segment_sum(from, to), moments_.segment_sum_sq(from, to),
                                 to - from + 1);
  }

  /// log marginal with independent mean priors on [1, theta-1] and [theta, n].
  double log_marginal_cp(std::size_t n, std::size_t theta) const {
    if (theta < 1 || theta > n || n > size())
      throw std::invalid_argument("log_marginal_cp: theta must be in [1, n]");
    return log_m_prefix_[theta - 1] + log_marginal_nocp(theta, n);
  }

  struct Stats {
    double cusum;  // max_theta log(Lbar_n^theta / Lbar_n)
    double sr;     // log(sum_theta Lbar_n^theta / Lbar_n)
    double pp;     // log(sum_theta Lbar_n^theta p(theta) / (Lbar_n (1-p)^n))
  };

  /// One pass over all change candidates, evaluating the split marginals
  /// from the prefix sums in O(1) each.
  Stats scan(double geom_p) const {
    const std::size_t n = size();
    if (n == 0) throw std::invalid_argument("OracleState::scan: no observations yet");
    if (!(geom_p > 0.0 && geom_p < 1.0))
      throw std::invalid_argument("OracleState::scan: geometric parameter must be in (0, 1)");
    const double log_p = std::log(geom_p);
    const double log_q = std::log1p(-geom_p);
    const double s1_n = moments_.segment_sum(1, n);
    const double s2_n = moments_.segment_sum_sq(1, n);

    double best = kNegInf;
    OnlineLogSumExp sum_plain, sum_prior;
    for (std::size_t theta = 1; theta <= n; ++theta) {
      const std::size_t len = n - theta + 1;
      const double s1 = s1_n - moments_.segment_sum(1, theta - 1);
      const double s2 = s2_n - moments_.segment_sum_sq(1, theta - 1);
      const double l = static_cast<double>(len);
      const double suffix =
          -l * kHalfLog2Pi - 0.5 * log_len_[len + 1] - 0.5 * (s2 - s1 * s1 / (l + 1.0));
      const double split = log_m_prefix_[theta - 1] + suffix;
      best = std::max(best, split);
      sum_plain.add(split);
      sum_prior.add(split + log_p + static_cast<double>(theta - 1) * log_q);
    }
    const double log_m_full = log_m_prefix_[n];
    return Stats{best - log_m_full, sum_plain.value() - log_m_full,
                 sum_prior.value() - log_m_full - static_cast<double>(n) * log_q};
  }

 private:
  PrefixMoments moments_;
  std::vector<double> log_m_prefix_{0.0};  // log marginal of prefix [1, j]
  std::vector<double> log_len_{kNegInf};   // log k lookup
};

enum class OracleKind { cusum, sr, pp };

class OracleDetector {
 public:
  explicit OracleDetector(OracleKind kind, double geom_p = 0.01) : kind_(kind), geom_p_(geom_p) {}

  double step(double z) {
    state_.push(z);
    const auto stats = state_.scan(geom_p_);
    switch (kind_) {
      case OracleKind::cusum: return stat_ = stats.cusum;
      case OracleKind::sr: return stat_ = stats.sr;
      case OracleKind::pp: return stat_ = stats.pp;
    }
    throw std::logic_error("OracleDetector: unknown kind");
  }

  double statistic() const { return stat_; }
  const OracleState& state() const { return state_; }

 private:
  OracleKind kind_;
  double geom_p_;
  OracleState state_;
  double stat_ = 0.0;
};

}  // namespace cpm
