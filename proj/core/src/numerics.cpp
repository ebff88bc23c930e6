#include "sus/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sus/error.hpp"

namespace sus {

Mat row_softmax(const Mat& scores, bool causal) {
  require(scores.rows() == scores.cols(), ErrorKind::kDimension,
          "row_softmax expects a square matrix, got " + std::to_string(scores.rows()) + "x" +
              std::to_string(scores.cols()));
  const std::size_t n = scores.rows();
  Mat out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t allowed = causal ? i + 1 : n;
    auto s = scores.row(i);
    auto w = out.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < allowed; ++j) mx = std::max(mx, s[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < allowed; ++j) {
      w[j] = std::exp(s[j] - mx);
      total += w[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < allowed; ++j) w[j] *= inv;
  }
  return out;
}

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> x, double h) {
  require(h > 0.0, ErrorKind::kDomain, "finite difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(ErrorKind::kEvaluation, "non-finite function value at coordinate " + std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double PowerLawFit::operator()(double x) const {
  return std::exp(log_prefactor + exponent * std::log(x));
}

PowerLawFit fit_power_law(std::span<const double> xs, std::span<const double> ys) {
  require(xs.size() == ys.size(), ErrorKind::kDimension, "xs and ys differ in length");
  require(xs.size() >= 2, ErrorKind::kArity, "power-law fit needs at least 2 points");
  const std::size_t m = xs.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    require(xs[i] > 0.0 && ys[i] > 0.0, ErrorKind::kDomain,
            "power-law fit needs strictly positive inputs (point " + std::to_string(i) + ")");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double dx = lx[i] - mx;
    const double dy = ly[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 0.0, ErrorKind::kDomain, "power-law fit needs at least two distinct xs");

  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  fit.log_prefactor = my - fit.exponent * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ly[i] - (fit.log_prefactor + fit.exponent * lx[i]);
    ss_res += r * r;
  }
  // A constant series is fitted exactly by the zero-slope line.
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

double mean_component_variance(std::span<const std::vector<double>> samples) {
  require(samples.size() >= 2, ErrorKind::kArity, "variance needs at least 2 samples");
  const std::size_t dim = samples.front().size();
  for (const auto& s : samples)
    require(s.size() == dim, ErrorKind::kDimension, "samples differ in shape");
  require(dim > 0, ErrorKind::kDimension, "samples are empty vectors");

  const double count = static_cast<double>(samples.size());
  double total = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s[k];
    mean /= count;
    double ss = 0.0;
    for (const auto& s : samples) {
      const double d = s[k] - mean;
      ss += d * d;
    }
    total += ss / (count - 1.0);
  }
  return total / static_cast<double>(dim);
}

void MomentSums::add(std::span<const double> sample) {
  require(sample.size() == sum_.size(), ErrorKind::kDimension, "sample shape mismatch");
  for (std::size_t k = 0; k < sample.size(); ++k) {
    const double d = sample[k] - shift_[k];
    sum_[k] += d;
    sum_sq_[k] += d * d;
  }
  ++count_;
}

void MomentSums::merge(const MomentSums& other) {
  require(other.dim() == dim(), ErrorKind::kDimension, "moment shape mismatch");
  for (std::size_t k = 0; k < sum_.size(); ++k) {
    sum_[k] += other.sum_[k];
    sum_sq_[k] += other.sum_sq_[k];
  }
  count_ += other.count_;
}

double MomentSums::mean_component_variance() const {
  return mean_component_variance_without(MomentSums(shift_));
}

double MomentSums::mean_component_variance_without(const MomentSums& excluded) const {
  require(excluded.dim() == dim(), ErrorKind::kDimension, "moment shape mismatch");
  require(dim() > 0, ErrorKind::kDimension, "empty moments");
  const std::size_t count = count_ - excluded.count_;
  require(count_ >= excluded.count_ && count >= 2, ErrorKind::kArity,
          "variance needs at least 2 samples");
  const double c = static_cast<double>(count);
  double total = 0.0;
  for (std::size_t k = 0; k < sum_.size(); ++k) {
    const double s = sum_[k] - excluded.sum_[k];
    const double ss = sum_sq_[k] - excluded.sum_sq_[k];
    total += std::max(0.0, ss - s * s / c) / (c - 1.0);
  }
  return total / static_cast<double>(dim());
}

double relative_error(std::span<const double> a, std::span<const double> reference) {
  require(a.size() == reference.size(), ErrorKind::kDimension, "relative_error size mismatch");
  double diff = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff = std::max(diff, std::abs(a[k] - reference[k]));
    scale = std::max(scale, std::abs(reference[k]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

double jackknife_se(std::span<const double> leave_one_out) {
  const std::size_t m = leave_one_out.size();
  if (m < 2) return 0.0;
  double mean = 0.0;
  for (double v : leave_one_out) mean += v;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - mean) * (v - mean);
  return std::sqrt(ss * static_cast<double>(m - 1) / static_cast<double>(m));
}

}  // namespace sus
