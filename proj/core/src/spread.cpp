#include "sus/spread.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "sus/error.hpp"

namespace sus::spread {

void SpreadConfig::validate() const {
  require(p > 0.0 && p <= 1.0, ErrorKind::kDomain, "top-p threshold must be in (0, 1]");
}

std::size_t top_p_count(std::span<const double> row, double p) {
  require(!row.empty(), ErrorKind::kDomain, "top-p count of an empty row");
  SpreadConfig{p}.validate();
  double total = 0.0;
  for (double w : row) {
    require(w >= 0.0, ErrorKind::kDomain, "attention weights must be non-negative");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-6, ErrorKind::kDomain,
          "attention row sums to " + std::to_string(total));

  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  // Relative slack absorbs rounding in the running sum, e.g. uniform rows
  // where p * m is an integer.
  const double target = p * total * (1.0 - 1e-12);
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += row[order[k]];
    if (cum >= target) return k + 1;
  }
  return order.size();
}

std::vector<std::optional<double>> aggregate_phi(std::span<const std::size_t> s) {
  std::vector<std::optional<double>> phi(s.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    require(s[i] >= 1, ErrorKind::kDomain, "spread values must be >= 1");
    num += static_cast<double>(s[i]);
    den += static_cast<double>(i);
    if (i > 0) phi[i] = num / den;
  }
  return phi;
}

double phi_at(std::span<const std::size_t> s, std::size_t i) {
  require(i > 0, ErrorKind::kUndefinedPosition, "phi is undefined at position 0");
  require(i < s.size(), ErrorKind::kDomain, "position beyond spread vector");
  return *aggregate_phi(s.first(i + 1))[i];
}

SpreadReport spread_profile(const Mat& W, const SpreadConfig& cfg) {
  cfg.validate();
  require(W.rows() == W.cols() && W.rows() >= 1, ErrorKind::kDimension,
          "spread profile needs a square attention matrix");
  const std::size_t n = W.rows();
  SpreadReport r;
  r.positions = n;
  r.s.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = W.row(i);
    double upper = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) upper += std::abs(row[j]);
    require(upper <= 1e-9, ErrorKind::kValidation,
            "row " + std::to_string(i) + " has mass above the diagonal");
    r.s[i] = top_p_count(row.first(i + 1), cfg.p);
  }
  r.phi = aggregate_phi(r.s);
  return r;
}

HeadSpreadStats head_spread_stats(std::span<const double> phis) {
  require(!phis.empty(), ErrorKind::kDomain, "head statistics need at least one head");
  HeadSpreadStats st;
  st.phis.assign(phis.begin(), phis.end());
  double sum = 0.0;
  double log_sum = 0.0;
  std::map<long, std::size_t> bins;
  for (double phi : phis) {
    require(phi > 0.0 && std::isfinite(phi), ErrorKind::kDomain, "phi must be positive");
    sum += phi;
    log_sum += std::log(phi);
    ++bins[static_cast<long>(std::floor(std::log2(phi) / kHistogramBinWidth))];
  }
  const double count = static_cast<double>(phis.size());
  st.arithmetic_mean = sum / count;
  // Rounding can push exp(mean log) a hair above the mean for identical inputs.
  st.geometric_mean = std::min(std::exp(log_sum / count), st.arithmetic_mean);
  for (const auto& [idx, c] : bins) {
    const double lo = static_cast<double>(idx) * kHistogramBinWidth;
    st.log2_histogram.push_back(HistogramBin{lo, lo + kHistogramBinWidth, c});
  }
  return st;
}

std::vector<StridedSpread> strided_spread(std::span<const std::size_t> s, std::size_t stride) {
  require(stride >= 1, ErrorKind::kDomain, "stride must be >= 1");
  std::vector<StridedSpread> out;
  for (std::size_t start = 0; start < s.size(); start += stride) {
    const std::size_t end = std::min(s.size(), start + stride);
    double sum = 0.0;
    for (std::size_t i = start; i < end; ++i) sum += static_cast<double>(s[i]);
    out.push_back(StridedSpread{start, sum / static_cast<double>(end - start)});
  }
  return out;
}

}  // namespace sus::spread
