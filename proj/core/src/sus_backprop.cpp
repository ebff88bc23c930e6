#include "sus/sus_backprop.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sus/error.hpp"

namespace sus {

namespace {

void validate_weights(const Mat& W, double c, bool causal) {
  require(c > 0.0 && std::isfinite(c), ErrorKind::kDomain, "retention parameter c must be > 0");
  require(W.rows() == W.cols() && W.rows() >= 1, ErrorKind::kDimension,
          "attention weights must be a non-empty square matrix");
  const std::size_t n = W.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t allowed = causal ? i + 1 : n;
    double total = 0.0;
    for (std::size_t j = 0; j < allowed; ++j) {
      require(W(i, j) >= 0.0, ErrorKind::kValidation,
              "negative attention weight in row " + std::to_string(i));
      total += W(i, j);
    }
    require(std::abs(total - 1.0) <= kRowSumTolerance, ErrorKind::kValidation,
            "row " + std::to_string(i) + " of W sums to " + std::to_string(total));
  }
}

template <typename Uniform>
MaskedWeights build_mask(const Mat& W, double c, bool causal, Uniform&& uniform) {
  validate_weights(W, c, causal);
  const std::size_t n = W.rows();
  const double inv_c = 1.0 / c;
  MaskedWeights m;
  m.n = n;
  m.c = c;
  m.causal = causal;
  m.row_offsets.reserve(n + 1);
  m.row_offsets.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t allowed = causal ? i + 1 : n;
    for (std::size_t j = 0; j < allowed; ++j) {
      const double w = W(i, j);
      if (w <= 0.0) continue;
      const double q = acceptance_probability(w, c);
      if (q >= 1.0) {
        m.col_indices.push_back(j);
        m.values.push_back(w);
      } else if (uniform(i, j) < q) {
        m.col_indices.push_back(j);
        m.values.push_back(inv_c);  // w / q with q = c w
      }
    }
    m.row_offsets.push_back(m.values.size());
  }
  return m;
}

}  // namespace

double acceptance_probability(double w, double c) noexcept { return std::min(c * w, 1.0); }

Mat MaskedWeights::to_dense() const {
  Mat out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
      out(i, col_indices[k]) = values[k];
  return out;
}

MaskedWeights sample_mask(const Mat& W, double c, bool causal, const RngStream& rng) {
  const std::uint64_t n = W.rows();
  return build_mask(W, c, causal,
                    [&](std::size_t i, std::size_t j) { return rng.uniform_at(i * n + j); });
}

MaskedWeights mask_from_uniforms(const Mat& W, double c, bool causal, const Mat& uniforms) {
  require(uniforms.same_shape(W), ErrorKind::kDimension, "uniforms must match W");
  return build_mask(W, c, causal, [&](std::size_t i, std::size_t j) { return uniforms(i, j); });
}

RetentionStats retention_stats(const MaskedWeights& mask) {
  RetentionStats s;
  s.nnz = mask.nnz();
  if (mask.n == 0) return s;
  const double n = static_cast<double>(mask.n);
  s.mean_retained_per_row = static_cast<double>(s.nnz) / n;
  s.kappa = s.mean_retained_per_row / n;
  s.xi = mask.c / n;
  return s;
}

GradTriple attn_backward_sparse(const MaskedWeights& mask, const AttnInput& input,
                                const Mat& Vbar, const Mat& dVbar) {
  input.validate();
  const std::size_t n = input.n();
  const std::size_t d = input.d();
  require(mask.n == n && mask.row_offsets.size() == n + 1, ErrorKind::kDimension,
          "mask size does not match attention input");
  require(Vbar.same_shape(input.V) && dVbar.same_shape(input.V), ErrorKind::kDimension,
          "Vbar and dVbar must be n x d");

  const double tau = input.tau;
  GradTriple g{Mat(n, d), Mat(n, d), Mat(n, d)};
  for (std::size_t i = 0; i < n; ++i) {
    auto gi = dVbar.row(i);
    auto vbi = Vbar.row(i);
    auto qi = input.Q.row(i);
    auto dqi = g.dQ.row(i);
    double vbar_dot_g = 0.0;
    for (std::size_t nu = 0; nu < d; ++nu) vbar_dot_g += vbi[nu] * gi[nu];

    for (std::size_t k = mask.row_offsets[i]; k < mask.row_offsets[i + 1]; ++k) {
      const std::size_t j = mask.col_indices[k];
      const double w = mask.values[k];
      auto vj = input.V.row(j);
      double v_dot_g = 0.0;
      for (std::size_t nu = 0; nu < d; ++nu) v_dot_g += vj[nu] * gi[nu];
      const double m = tau * (w * (v_dot_g - vbar_dot_g));

      auto kj = input.K.row(j);
      auto dkj = g.dK.row(j);
      auto dvj = g.dV.row(j);
      for (std::size_t mu = 0; mu < d; ++mu) {
        dqi[mu] += m * kj[mu];
        dkj[mu] += m * qi[mu];  // transpose product as a scatter over rows
        dvj[mu] += w * gi[mu];
      }
    }
  }
  return g;
}

GradTriple enumerate_sparse_expectation(const AttnForwardState& state, const AttnInput& input,
                                        const Mat& dVbar, double c) {
  require(c > 0.0 && std::isfinite(c), ErrorKind::kDomain, "c must be > 0");
  const std::size_t n = input.n();
  std::vector<std::pair<std::size_t, std::size_t>> uncertain;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < (input.causal ? i + 1 : n); ++j)
      if (state.W(i, j) > 0.0 && acceptance_probability(state.W(i, j), c) < 1.0) uncertain.emplace_back(i, j);
  require(uncertain.size() <= kMaxEnumeratedEntries, ErrorKind::kCapacity,
          std::to_string(uncertain.size()) + " uncertain entries exceed the enumeration limit of " +
              std::to_string(kMaxEnumeratedEntries));

  GradTriple mean{Mat(n, input.d()), Mat(n, input.d()), Mat(n, input.d())};
  Mat uniforms(n, n);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << uncertain.size()); ++bits) {
    double prob = 1.0;
    for (std::size_t e = 0; e < uncertain.size(); ++e) {
      const auto [i, j] = uncertain[e];
      const double q = acceptance_probability(state.W(i, j), c);
      const bool keep = (bits >> e) & 1;
      uniforms(i, j) = keep ? 0.0 : 1.0;
      prob *= keep ? q : 1.0 - q;
    }
    if (prob == 0.0) continue;
    const GradTriple g =
        attn_backward_sparse(mask_from_uniforms(state.W, c, input.causal, uniforms), input, state.Vbar, dVbar);
    mean.dQ += prob * g.dQ;
    mean.dK += prob * g.dK;
    mean.dV += prob * g.dV;
  }
  return mean;
}

std::uint64_t backward_cost(const MaskedWeights& mask, std::size_t d) noexcept {
  const std::uint64_t dd = d;
  return static_cast<std::uint64_t>(mask.nnz()) * (4 * dd + 2) +
         static_cast<std::uint64_t>(mask.n) * dd;
}

std::uint64_t dense_backward_cost(std::size_t n, std::size_t d, bool causal) noexcept {
  const std::uint64_t nn = n;
  const std::uint64_t entries = causal ? nn * (nn + 1) / 2 : nn * nn;
  return entries * (4 * static_cast<std::uint64_t>(d) + 2) + nn * d;
}

}  // namespace sus
