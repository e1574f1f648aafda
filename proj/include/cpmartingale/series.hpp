#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cpm {

/// A sequence of d-dimensional observations in flat row-major storage.
/// All entries are finite and the dimension is fixed for the lifetime
/// of the series.
class Series {
 public:
  explicit Series(std::size_t dim = 1) : dim_(dim) {
    if (dim_ == 0) throw std::invalid_argument("Series: dimension must be >= 1");
  }

  static Series scalars(std::vector<double> values) {
    Series s(1);
    s.values_.reserve(values.size());
    for (double v : values) s.push(v);
    return s;
  }

  void push(double z) {
    if (dim_ != 1) throw std::invalid_argument("Series::push(double): series is not 1-D");
    check_finite(z);
    values_.push_back(z);
  }

  void push(std::span<const double> obs) {
    if (obs.size() != dim_) throw std::invalid_argument("Series::push: dimension mismatch");
    for (double v : obs) check_finite(v);
    values_.insert(values_.end(), obs.begin(), obs.end());
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size() / dim_; }
  bool empty() const { return values_.empty(); }

  std::span<const double> at(std::size_t i) const {
    return std::span<const double>(values_.data() + i * dim_, dim_);
  }

  double scalar_at(std::size_t i) const {
    if (dim_ != 1) throw std::invalid_argument("Series::scalar_at: series is not 1-D");
    return values_[i];
  }

  const std::vector<double>& raw() const { return values_; }

 private:
  static void check_finite(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("Series: observation entries must be finite");
  }

  std::size_t dim_;
  std::vector<double> values_;
};

}  // namespace cpm
