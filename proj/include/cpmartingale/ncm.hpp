#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpmartingale/math.hpp"
#include "cpmartingale/rng.hpp"
#include "cpmartingale/series.hpp"

namespace cpm {

/// Fixed reference sample for inductive non-conformity scoring.
/// Shuffled once at construction and immutable afterwards.
class TrainingSet {
 public:
  TrainingSet(Series data, RngHandle& rng) : data_(std::move(data)) {
    if (data_.empty()) throw std::invalid_argument("TrainingSet: needs at least one observation");
    shuffle_rows(rng);
    mean_.assign(data_.dim(), 0.0);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      auto row = data_.at(i);
      for (std::size_t d = 0; d < data_.dim(); ++d) mean_[d] += row[d];
    }
    for (double& m : mean_) m /= static_cast<double>(data_.size());
  }

  const Series& data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  std::size_t dim() const { return data_.dim(); }
  std::span<const double> mean() const { return mean_; }
  double scalar_mean() const { return mean_.at(0); }

 private:
  void shuffle_rows(RngHandle& rng) {
    std::vector<std::size_t> perm(data_.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    Series shuffled(data_.dim());
    for (std::size_t i : perm) shuffled.push(data_.at(i));
    data_ = std::move(shuffled);
  }

  Series data_;
  std::vector<double> mean_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

/// Mean Euclidean distance from z to its k nearest training points.
inline double knn_score(const TrainingSet& train, std::span<const double> z, std::size_t k,
                        std::vector<double>& scratch) {
  if (z.size() != train.dim()) throw std::invalid_argument("knn_score: dimension mismatch");
  if (k == 0 || k > train.size()) throw std::invalid_argument("knn_score: k must be in [1, m]");
  scratch.resize(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    scratch[i] = squared_distance(train.data().at(i), z);
  std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += std::sqrt(scratch[i]);
  return acc / static_cast<double>(k);
}

inline double knn_score(const TrainingSet& train, std::span<const double> z, std::size_t k) {
  std::vector<double> scratch;
  return knn_score(train, z, k, scratch);
}

struct LrGaussianParams {
  double mu_r = 1.0;
  double sigma2 = 1.0;
  double sigma2_r = 1.0;

  void validate() const {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("LrGaussianParams: sigma2 must be positive");
    if (sigma2_r < 0.0) throw std::invalid_argument("LrGaussianParams: sigma2_r must be >= 0");
  }
};

/// Likelihood-ratio score N(z | mu_r, sigma2 + sigma2_r) / N(z | mu_hat0, sigma2)
/// with mu_hat0 the training mean.
inline double lr_gaussian_score(double mu_hat0, double z, const LrGaussianParams& params) {
  params.validate();
  return std::exp(gaussian_log_pdf(z, params.mu_r, params.sigma2 + params.sigma2_r) -
                  gaussian_log_pdf(z, mu_hat0, params.sigma2));
}

inline double lr_gaussian_score(const TrainingSet& train, std::span<const double> z,
                                const LrGaussianParams& params) {
  if (train.dim() != 1 || z.size() != 1)
    throw std::invalid_argument("lr_gaussian_score: 1-D observations required");
  return lr_gaussian_score(train.scalar_mean(), z[0], params);
}

/// Absolute deviation of z from the mean of the reference values.
inline double mean_distance_score(std::span<const double> others, double z) {
  if (others.empty()) throw std::invalid_argument("mean_distance_score: reference set is empty");
  double mean = 0.0;
  for (double v : others) mean += v;
  mean /= static_cast<double>(others.size());
  return std::abs(z - mean);
}

struct NcmConfig {
  enum class Kind { knn, lr_gaussian, mean_distance };
  Kind kind = Kind::knn;
  std::size_t k = 7;
  LrGaussianParams lr;

  void validate(std::size_t training_size) const {
    if (kind == Kind::knn && (k == 0 || k > training_size))
      throw std::invalid_argument("NcmConfig: k must be in [1, m]");
    if (kind == Kind::lr_gaussian) lr.validate();
  }
};

inline std::string ncm_kind_name(NcmConfig::Kind kind) {
  switch (kind) {
    case NcmConfig::Kind::knn: return "knn";
    case NcmConfig::Kind::lr_gaussian: return "lr-gaussian";
    case NcmConfig::Kind::mean_distance: return "mean-distance";
  }
  return "?";
}

class Ncm {
 public:
  virtual ~Ncm() = default;
  virtual double score(std::span<const double> z) = 0;
};

class KnnNcm final : public Ncm {
 public:
  KnnNcm(TrainingSet train, std::size_t k) : train_(std::move(train)), k_(k) {
    if (k_ == 0 || k_ > train_.size()) throw std::invalid_argument("KnnNcm: k must be in [1, m]");
  }
  double score(std::span<const double> z) override { return knn_score(train_, z, k_, scratch_); }

 private:
  TrainingSet train_;
  std::size_t k_;
  std::vector<double> scratch_;
};

class LrGaussianNcm final : public Ncm {
 public:
  LrGaussianNcm(const TrainingSet& train, LrGaussianParams params)
      : mu_hat0_(train.scalar_mean()), params_(params) {
    if (train.dim() != 1) throw std::invalid_argument("LrGaussianNcm: 1-D training set required");
    params_.validate();
  }
  double score(std::span<const double> z) override {
    if (z.size() != 1) throw std::invalid_argument("LrGaussianNcm: 1-D observation required");
    return lr_gaussian_score(mu_hat0_, z[0], params_);
  }

 private:
  double mu_hat0_;
  LrGaussianParams params_;
};

/// Inductive form of the mean-distance NCM: |z - training mean|.
class MeanDistanceNcm final : public Ncm {
 public:
  explicit MeanDistanceNcm(const TrainingSet& train) : mu_hat0_(train.scalar_mean()) {
    if (train.dim() != 1) throw std::invalid_argument("MeanDistanceNcm: 1-D training set required");
  }
  double score(std::span<const double> z) override {
    if (z.size() != 1) throw std::invalid_argument("MeanDistanceNcm: 1-D observation required");
    return std::abs(z[0] - mu_hat0_);
  }

 private:
  double mu_hat0_;
};

inline std::unique_ptr<Ncm> make_ncm(const NcmConfig& cfg, TrainingSet train) {
  cfg.validate(train.size());
  switch (cfg.kind) {
    case NcmConfig::Kind::knn: return std::make_unique<KnnNcm>(std::move(train), cfg.k);
    case NcmConfig::Kind::lr_gaussian: return std::make_unique<LrGaussianNcm>(train, cfg.lr);
    case NcmConfig::Kind::mean_distance: return std::make_unique<MeanDistanceNcm>(train);
  }
  throw std::invalid_argument("make_ncm: unknown NCM kind");
}

}  // namespace cpm
