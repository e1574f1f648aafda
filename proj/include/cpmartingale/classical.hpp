#pragma once

#include <cmath>
#include <stdexcept>

#include "cpmartingale/math.hpp"

namespace cpm {

/// Known pre/post-change Gaussian mean-shift model with common variance.
struct GaussianShiftModel {
  double mu0 = 0.0;
  double mu1 = 1.0;
  double sigma2 = 1.0;

  void validate() const {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("GaussianShiftModel: sigma2 must be positive");
  }

  /// log(f1(z) / f0(z)) = ((mu1 - mu0) z - (mu1^2 - mu0^2)/2) / sigma2.
  double loglr(double z) const {
    return ((mu1 - mu0) * z - 0.5 * (mu1 * mu1 - mu0 * mu0)) / sigma2;
  }
};

/// CUSUM recursion W_n = ell_n + max(W_{n-1}, 0), W_0 = 0; equals the max
/// over change candidates of the suffix log-likelihood-ratio sum.
inline double cusum_step(double w_prev, double ell) { return ell + std::max(w_prev, 0.0); }

/// Shiryaev-Roberts recursion in log domain: R_n = (R_{n-1} + 1) e^ell,
/// R_0 = 0. The statistic is log R_n.
inline double sr_step(double log_r_prev, double ell) { return ell + log_add_exp(log_r_prev, 0.0); }

/// Posterior-probability recursion in log domain under a Geometric(p)
/// prior: rho_n = e^ell (rho_{n-1} + p) / (1 - p), rho_0 = 0. The
/// statistic is log rho_n.
inline double pp_step(double log_rho_prev, double ell, double geom_p) {
  if (!(geom_p > 0.0 && geom_p < 1.0))
    throw std::invalid_argument("pp_step: geometric parameter must be in (0, 1)");
  return ell + log_add_exp(log_rho_prev, std::log(geom_p)) - std::log1p(-geom_p);
}

class CusumDetector {
 public:
  explicit CusumDetector(GaussianShiftModel model) : model_(model) { model_.validate(); }
  double step(double z) { return w_ = cusum_step(w_, model_.loglr(z)); }
  double statistic() const { return w_; }

 private:
  GaussianShiftModel model_;
  double w_ = 0.0;
};

class SrDetector {
 public:
  explicit SrDetector(GaussianShiftModel model) : model_(model) { model_.validate(); }
  double step(double z) { return log_r_ = sr_step(log_r_, model_.loglr(z)); }
  double statistic() const { return log_r_; }

 private:
  GaussianShiftModel model_;
  double log_r_ = kNegInf;
};

class PpDetector {
 public:
  PpDetector(GaussianShiftModel model, double geom_p) : model_(model), geom_p_(geom_p) {
    model_.validate();
    if (!(geom_p_ > 0.0 && geom_p_ < 1.0))
      throw std::invalid_argument("PpDetector: geometric parameter must be in (0, 1)");
  }
  double step(double z) { return log_rho_ = pp_step(log_rho_, model_.loglr(z), geom_p_); }
  double statistic() const { return log_rho_; }

 private:
  GaussianShiftModel model_;
  double geom_p_;
  double log_rho_ = kNegInf;
};

}  // namespace cpm
