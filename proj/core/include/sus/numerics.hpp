#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sus/mat.hpp"

namespace sus {

inline constexpr double kDefaultFdStep = 1e-5;

// Row-wise softmax with per-row max subtraction. With causal set, entries
// above the diagonal are treated as -inf and come out exactly 0.
Mat row_softmax(const Mat& scores, bool causal);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x,
                                     double h = kDefaultFdStep);

// max_k |a_k - b_k| / max_k |b_k|; the plain max difference when b is all zero.
double relative_error(std::span<const double> a, std::span<const double> reference);

struct PowerLawFit {
  double exponent = 0.0;
  double log_prefactor = 0.0;
  double r_squared = 0.0;

  double operator()(double x) const;
};

// Ordinary least squares on (log x, log y).
PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys);

// Per-component unbiased variance (divisor S-1), averaged over components.
double mean_component_variance(std::span<const std::vector<double>> samples);

// Accumulates per-component first and second moments of (sample - shift) so
// that variance over a union of groups, or leave-one-group-out variance, is
// cheap to evaluate. A shift near the mean avoids cancellation; all sums that
// are merged or subtracted must use the same shift.
class MomentSums {
 public:
  explicit MomentSums(std::size_t dim = 0)
      : shift_(dim, 0.0), sum_(dim, 0.0), sum_sq_(dim, 0.0) {}
  explicit MomentSums(std::span<const double> shift)
      : shift_(shift.begin(), shift.end()), sum_(shift.size(), 0.0), sum_sq_(shift.size(), 0.0) {}

  void add(std::span<const double> sample);
  void merge(const MomentSums& other);

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return sum_.size(); }

  double mean_component_variance() const;
  // Mean component variance of this set with `excluded` removed.
  double mean_component_variance_without(const MomentSums& excluded) const;

 private:
  std::size_t count_ = 0;
  std::vector<double> shift_;
  std::vector<double> sum_;
  std::vector<double> sum_sq_;
};

// Jackknife standard error from leave-one-out estimates.
double jackknife_se(std::span<const double> leave_one_out);

}  // namespace sus
