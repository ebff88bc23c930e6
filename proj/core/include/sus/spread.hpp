#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sus/mat.hpp"

namespace sus::spread {

struct SpreadConfig {
  double p = 0.9;  // top-p mass threshold, in (0, 1]

  void validate() const;
};

struct SpreadReport {
  std::vector<std::size_t> s;              // spread per position
  std::vector<std::optional<double>> phi;  // aggregate spread fraction; absent at 0
  std::size_t positions = 0;
};

struct HistogramBin {
  double lower = 0.0;  // log2(phi) bin edges
  double upper = 0.0;
  std::size_t count = 0;
};

struct HeadSpreadStats {
  std::vector<double> phis;
  double arithmetic_mean = 0.0;
  double geometric_mean = 0.0;
  std::vector<HistogramBin> log2_histogram;
};

inline constexpr double kHistogramBinWidth = 0.5;
inline constexpr std::size_t kReportStride = 10;

// Size of the smallest set of largest weights whose mass reaches p. Ties are
// taken in ascending position order.
std::size_t top_p_count(std::span<const double> row, double p);

// phi_i = sum_{j<=i} s_j / sum_{j<=i} j; position 0 has no value.
std::vector<std::optional<double>> aggregate_phi(std::span<const std::size_t> s);
// phi at one position; throws for i == 0.
double phi_at(std::span<const std::size_t> s, std::size_t i);

SpreadReport spread_profile(const Mat& W, const SpreadConfig& cfg = {});

HeadSpreadStats head_spread_stats(std::span<const double> phis);

struct StridedSpread {
  std::size_t position = 0;  // first position of the block
  double mean_s = 0.0;
};

// Mean s over consecutive blocks of `stride` positions.
std::vector<StridedSpread> strided_spread(std::span<const std::size_t> s,
                                          std::size_t stride = kReportStride);

}  // namespace sus::spread
