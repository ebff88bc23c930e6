#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sus/attention.hpp"
#include "sus/mat.hpp"
#include "sus/rng.hpp"

namespace sus {

// Stochastized attention weights in compressed sparse-row form. Entry (i, j)
// is kept with probability q_ij = min(c W_ij, 1) and stores the upweighted
// value W_ij / q_ij = max(W_ij, 1/c).
struct MaskedWeights {
  std::size_t n = 0;
  double c = 0.0;
  bool causal = true;
  std::vector<std::size_t> row_offsets;  // n + 1 entries
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }
  std::size_t row_nnz(std::size_t i) const { return row_offsets[i + 1] - row_offsets[i]; }
  Mat to_dense() const;
};

struct RetentionStats {
  std::size_t nnz = 0;
  double mean_retained_per_row = 0.0;
  double kappa = 0.0;  // mean retained per row / n
  double xi = 0.0;     // c / n
};

inline constexpr double kRowSumTolerance = 1e-6;

double acceptance_probability(double w, double c) noexcept;

// Retains every allowed entry independently with probability min(c W_ij, 1).
// The uniform for entry (i, j) is rng.uniform_at(i * n + j), so for a fixed
// stream the retained set only grows with c.
MaskedWeights sample_mask(const Mat& W, double c, bool causal, const RngStream& rng);

// Same rule with caller-provided uniforms: entry kept iff uniforms(i, j) < q_ij.
MaskedWeights mask_from_uniforms(const Mat& W, double c, bool causal, const Mat& uniforms);

RetentionStats retention_stats(const MaskedWeights& mask);

// The dense backward with W replaced by the masked weights, touching
// only retained entries. Vbar is the unmodified forward output.
GradTriple attn_backward_sparse(const MaskedWeights& mask, const AttnInput& input,
                                const Mat& Vbar, const Mat& dVbar);

inline constexpr std::size_t kMaxEnumeratedEntries = 20;

// Exact expectation of attn_backward_sparse over every mask configuration,
// each weighted by its probability. Entries with q = 1 are always kept; more
// than 20 uncertain entries is a capacity error.
GradTriple enumerate_sparse_expectation(const AttnForwardState& state, const AttnInput& input,
                                        const Mat& dVbar, double c);

// Multiply-accumulate count of attn_backward_sparse: nnz (4d + 2) for the
// per-entry work plus n d for the per-row Vbar . dVbar terms.
std::uint64_t backward_cost(const MaskedWeights& mask, std::size_t d) noexcept;

// The same accounting for the dense backward, where every allowed entry is touched.
std::uint64_t dense_backward_cost(std::size_t n, std::size_t d, bool causal) noexcept;

}  // namespace sus
