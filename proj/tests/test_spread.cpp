#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sus/spread.hpp"
#include "test_util.hpp"

namespace sus::spread {
namespace {

std::vector<double> random_row(std::size_t m, RngCursor& rng) {
  std::vector<double> row(m);
  double total = 0.0;
  for (double& w : row) total += (w = std::exp(3.0 * rng.normal()));
  for (double& w : row) w /= total;
  return row;
}

// smallest k over all subsets: sort descending, count until mass >= p
std::size_t sorted_count(std::vector<double> row, double p) {
  std::sort(row.begin(), row.end(), std::greater<>());
  double cum = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    cum += row[k];
    if (cum >= p - 1e-12) return k + 1;
  }
  return row.size();
}

Mat uniform_causal(std::size_t n) {
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) w(i, j) = 1.0 / double(i + 1);
  return w;
}

TEST(TopP, OneHot) {
  for (std::size_t m : {1u, 2u, 7u}) {
    std::vector<double> row(m, 0.0);
    row[m / 2] = 1.0;
    for (double p : {0.1, 0.9, 1.0}) EXPECT_EQ(top_p_count(row, p), 1u);
  }
}

TEST(TopP, UniformRowInteger) {
  for (std::size_t m = 1; m <= 200; ++m) {
    std::vector<double> row(m, 1.0 / double(m));
    // ceil(0.9 m) in integers
    const std::size_t expected = (9 * m + 9) / 10;
    EXPECT_EQ(top_p_count(row, 0.9), expected) << m;
    EXPECT_EQ(top_p_count(row, 1.0), m);
  }
}

TEST(TopP, MatchesSortOracle) {
  RngCursor rng(RngStream(21, 0));
  for (int t = 0; t < 50; ++t) {
    const auto row = random_row(1 + rng.below(60), rng);
    for (double p : {0.5, 0.9, 0.99}) EXPECT_EQ(top_p_count(row, p), sorted_count(row, p));
  }
}

TEST(TopP, Errors) {
  EXPECT_SUS_ERROR(top_p_count(std::vector<double>{}, 0.9), ErrorKind::kDomain);
  EXPECT_SUS_ERROR(top_p_count(std::vector<double>{0.5, 0.5}, 0.0), ErrorKind::kDomain);
  EXPECT_SUS_ERROR(top_p_count(std::vector<double>{0.5, 0.5}, 1.5), ErrorKind::kDomain);
  EXPECT_SUS_ERROR(top_p_count(std::vector<double>{1.5, -0.5}, 0.9), ErrorKind::kDomain);
  EXPECT_SUS_ERROR(top_p_count(std::vector<double>{0.5, 0.4}, 0.9), ErrorKind::kDomain);
}

TEST(Spread, DiagonalIsAllOnes) {
  const std::size_t n = 50;
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i) w(i, i) = 1.0;
  const SpreadReport r = spread_profile(w);
  EXPECT_EQ(r.positions, n);
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(r.s[i], 1u);
  EXPECT_FALSE(r.phi[0].has_value());
  for (std::size_t i = 1; i < n; ++i) EXPECT_NEAR(*r.phi[i], 2.0 / double(i), 1e-15);
}

TEST(Spread, UniformCausal) {
  const std::size_t n = 400;
  const SpreadReport r = spread_profile(uniform_causal(n));
  long num = 0;
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(r.s[i], (9 * (i + 1) + 9) / 10);
    num += long((9 * (i + 1) + 9) / 10);
    if (i > 0) EXPECT_NEAR(*r.phi[i], double(num) / double(i * (i + 1) / 2), 1e-14);
  }
  // excess over 0.9 decays like 2.8 / i
  EXPECT_GT(*r.phi[134], 0.92);
  for (std::size_t i = 135; i < n; ++i) {
    EXPECT_GE(*r.phi[i], 0.88);
    EXPECT_LE(*r.phi[i], 0.92);
  }
}

TEST(Spread, AggregatePhiExamples) {
  const std::vector<std::size_t> ones(6, 1);
  const auto phi = aggregate_phi(ones);
  for (std::size_t i = 1; i < ones.size(); ++i) EXPECT_DOUBLE_EQ(*phi[i], 2.0 / double(i));
  const std::vector<std::size_t> s{1, 1, 2};
  EXPECT_DOUBLE_EQ(phi_at(s, 2), 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(phi_at(s, 1), 2.0);
}

TEST(Spread, AggregatePhiPrefixSums) {
  RngCursor rng(RngStream(22, 0));
  for (int t = 0; t < 100; ++t) {
    std::vector<std::size_t> s(2 + rng.below(80));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1 + rng.below(i + 1);
    const auto phi = aggregate_phi(s);
    for (std::size_t i = 1; i < s.size(); ++i) {
      long num = 0;
      for (std::size_t j = 0; j <= i; ++j) num += long(s[j]);
      const long den = long(i * (i + 1) / 2);
      EXPECT_NEAR(*phi[i], double(num) / double(den), 1e-14);
    }
  }
}

TEST(Spread, PositionZeroUndefined) {
  const std::vector<std::size_t> s{1, 2};
  EXPECT_SUS_ERROR(phi_at(s, 0), ErrorKind::kUndefinedPosition);
  EXPECT_SUS_ERROR(phi_at(s, 2), ErrorKind::kDomain);
  EXPECT_SUS_ERROR(aggregate_phi(std::vector<std::size_t>{1, 0}), ErrorKind::kDomain);
}

TEST(Spread, ValidationErrors) {
  Mat upper(3, 3);
  for (std::size_t i = 0; i < 3; ++i) upper(i, i) = 1.0;
  upper(0, 2) = 0.5;
  EXPECT_SUS_ERROR(spread_profile(upper), ErrorKind::kValidation);
  EXPECT_SUS_ERROR(spread_profile(Mat(2, 3)), ErrorKind::kDimension);
  EXPECT_SUS_ERROR(spread_profile(uniform_causal(4), SpreadConfig{0.0}), ErrorKind::kDomain);
}

TEST(Spread, RandomMatrixRowsMatchOracle) {
  RngCursor rng(RngStream(23, 0));
  const std::size_t n = 40;
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = random_row(i + 1, rng);
    std::copy(row.begin(), row.end(), w.row(i).begin());
  }
  const SpreadReport r = spread_profile(w);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = w.row(i).first(i + 1);
    EXPECT_EQ(r.s[i], sorted_count({row.begin(), row.end()}, 0.9));
  }
}

TEST(Spread, ChunkInvariance) {
  // the spread of row i only depends on row i, so a leading block of W gives
  // the same prefix
  RngCursor rng(RngStream(24, 0));
  const std::size_t n = 30;
  Mat w(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = random_row(i + 1, rng);
    std::copy(row.begin(), row.end(), w.row(i).begin());
  }
  Mat head(12, 12);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j <= i; ++j) head(i, j) = w(i, j);
  const SpreadReport full = spread_profile(w), part = spread_profile(head);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(full.s[i], part.s[i]);
    if (i > 0) EXPECT_DOUBLE_EQ(*full.phi[i], *part.phi[i]);
  }
}

TEST(HeadStats, Means) {
  const HeadSpreadStats st = head_spread_stats(std::vector<double>{0.25, 1.0});
  EXPECT_DOUBLE_EQ(st.arithmetic_mean, 0.625);
  EXPECT_NEAR(st.geometric_mean, 0.5, 1e-15);
  std::size_t total = 0;
  for (const auto& b : st.log2_histogram) {
    total += b.count;
    EXPECT_DOUBLE_EQ(b.upper - b.lower, kHistogramBinWidth);
  }
  EXPECT_EQ(total, 2u);
  EXPECT_DOUBLE_EQ(st.log2_histogram.front().lower, -2.0);
}

TEST(HeadStats, RandomProperties) {
  RngCursor rng(RngStream(25, 0));
  for (int t = 0; t < 100; ++t) {
    std::vector<double> phis(1 + rng.below(30));
    for (double& v : phis) v = std::exp(rng.normal());
    const HeadSpreadStats st = head_spread_stats(phis);
    EXPECT_GE(st.arithmetic_mean, st.geometric_mean);
    std::size_t total = 0;
    for (const auto& b : st.log2_histogram) total += b.count;
    EXPECT_EQ(total, phis.size());

    std::vector<double> shuffled = phis;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + shuffled.size() / 2, shuffled.end());
    const HeadSpreadStats other = head_spread_stats(shuffled);
    ASSERT_EQ(other.log2_histogram.size(), st.log2_histogram.size());
    for (std::size_t b = 0; b < st.log2_histogram.size(); ++b) {
      EXPECT_EQ(other.log2_histogram[b].count, st.log2_histogram[b].count);
      EXPECT_DOUBLE_EQ(other.log2_histogram[b].lower, st.log2_histogram[b].lower);
    }
  }
  const HeadSpreadStats same = head_spread_stats(std::vector<double>(7, 0.3));
  EXPECT_DOUBLE_EQ(same.geometric_mean, same.arithmetic_mean);
}

TEST(HeadStats, Errors) {
  EXPECT_SUS_ERROR(head_spread_stats(std::vector<double>{}), ErrorKind::kDomain);
  EXPECT_SUS_ERROR(head_spread_stats(std::vector<double>{1.0, 0.0}), ErrorKind::kDomain);
}

TEST(Strided, BlockMeans) {
  std::vector<std::size_t> s(25);
  std::iota(s.begin(), s.end(), 1);
  const auto blocks = strided_spread(s);
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[0].position, 0u);
  EXPECT_DOUBLE_EQ(blocks[0].mean_s, 5.5);
  EXPECT_EQ(blocks[2].position, 20u);
  EXPECT_DOUBLE_EQ(blocks[2].mean_s, 23.0);
  EXPECT_SUS_ERROR(strided_spread(s, 0), ErrorKind::kDomain);
}

}  // namespace
}  // namespace sus::spread
