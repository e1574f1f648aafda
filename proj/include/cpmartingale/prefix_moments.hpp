#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cpm {

/// Running prefix sums S1_j = sum z_i and S2_j = sum z_i^2 over a 1-D
/// stream, answering segment mean / mean-of-squares queries in O(1).
/// Indices are 1-based; an empty range (from > to) yields 0.
class PrefixMoments {
 public:
  PrefixMoments() : s1_{0.0}, s2_{0.0} {}

  void push(double z) {
    if (!std::isfinite(z)) throw std::invalid_argument("PrefixMoments::push: value must be finite");
    s1_.push_back(s1_.back() + z);
    s2_.push_back(s2_.back() + z * z);
  }

  std::size_t size() const { return s1_.size() - 1; }

  double segment_sum(std::size_t from, std::size_t to) const {
    check_range(from, to);
    if (from > to) return 0.0;
    return s1_[to] - s1_[from - 1];
  }

  double segment_sum_sq(std::size_t from, std::size_t to) const {
    check_range(from, to);
    if (from > to) return 0.0;
    return s2_[to] - s2_[from - 1];
  }

  double segment_mean(std::size_t from, std::size_t to) const {
    check_range(from, to);
    if (from > to) return 0.0;
    return (s1_[to] - s1_[from - 1]) / static_cast<double>(to - from + 1);
  }

  double segment_mean_sq(std::size_t from, std::size_t to) const {
    check_range(from, to);
    if (from > to) return 0.0;
    return (s2_[to] - s2_[from - 1]) / static_cast<double>(to - from + 1);
  }

 private:
  void check_range(std::size_t from, std::size_t to) const {
    if (from > to) return;  // empty range is always valid
    if (from < 1 || to > size())
      throw std::out_of_range("PrefixMoments: segment indices out of range");
  }

  std::vector<double> s1_;
  std::vector<double> s2_;
};

}  // namespace cpm
