#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace cpm {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; -inf acts as the identity.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

inline double log_sum_exp(std::span<const double> vals) {
  double hi = kNegInf;
  for (double v : vals) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : vals) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

/// Streaming log-sum-exp: keeps a running maximum and rescales the
/// accumulated sum whenever a larger term arrives.
class OnlineLogSumExp {
 public:
  void add(double v) {
    if (v == kNegInf) return;
    if (max_ == kNegInf) {
      max_ = v;
      sum_ = 1.0;
    } else if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

inline double gaussian_log_pdf(double z, double mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_log_pdf: variance must be positive");
  const double d = z - mean;
  return -kHalfLog2Pi - 0.5 * std::log(variance) - 0.5 * d * d / variance;
}

inline double gaussian_pdf(double z, double mean, double variance) {
  return std::exp(gaussian_log_pdf(z, mean, variance));
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

}  // namespace cpm
