#include <gtest/gtest.h>

#include <cmath>

#include "sus/attention.hpp"
#include "test_util.hpp"

namespace sus {
namespace {

using testing::normal_mat;

AttnInput random_input(std::size_t n, std::size_t d, double tau, bool causal, RngCursor& rng) {
  return AttnInput{normal_mat(n, d, rng), normal_mat(n, d, rng), normal_mat(n, d, rng), tau, causal};
}

TEST(AttnForward, SingleToken) {
  RngCursor rng(RngStream(1, 0));
  const AttnInput in = random_input(1, 3, 1.0, true, rng);
  const AttnForwardState st = attn_forward(in);
  EXPECT_EQ(st.W(0, 0), 1.0);
  EXPECT_EQ(st.Vbar, in.V);
}

TEST(AttnForward, ZeroQueriesGiveUniformCausalRows) {
  RngCursor rng(RngStream(1, 1));
  AttnInput in = random_input(3, 2, 1.0, true, rng);
  in.Q = Mat(3, 2);
  const AttnForwardState st = attn_forward(in);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(st.W(i, j), j <= i ? 1.0 / double(i + 1) : 0.0, 1e-16);
}

TEST(AttnForward, MatchesLongDoubleEvaluation) {
  RngCursor rng(RngStream(2, 0));
  const AttnInput in = random_input(4, 2, 1.0, false, rng);
  const AttnForwardState st = attn_forward(in);
  for (std::size_t i = 0; i < 4; ++i) {
    long double logits[4], mx = -1e300L, total = 0.0L;
    for (std::size_t j = 0; j < 4; ++j) {
      logits[j] = 0.0L;
      for (std::size_t k = 0; k < 2; ++k) logits[j] += static_cast<long double>(in.Q(i, k)) * in.K(j, k);
      mx = std::max(mx, logits[j]);
    }
    long double w[4];
    for (std::size_t j = 0; j < 4; ++j) total += (w[j] = std::exp(logits[j] - mx));
    for (std::size_t j = 0; j < 4; ++j) {
      w[j] /= total;
      EXPECT_NEAR(st.W(i, j), static_cast<double>(w[j]), 1e-14);
    }
    for (std::size_t nu = 0; nu < 2; ++nu) {
      long double vbar = 0.0L;
      for (std::size_t j = 0; j < 4; ++j) vbar += w[j] * in.V(j, nu);
      EXPECT_NEAR(st.Vbar(i, nu), static_cast<double>(vbar), 1e-14);
    }
  }
}

TEST(AttnForward, RowsStochasticForAnyTau) {
  RngCursor rng(RngStream(2, 1));
  for (double tau : {0.01, 1.0, 30.0})
    for (bool causal : {false, true}) {
      const AttnForwardState st = attn_forward(random_input(6, 3, tau, causal, rng));
      for (std::size_t i = 0; i < 6; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < 6; ++j) total += st.W(i, j);
        EXPECT_NEAR(total, 1.0, 1e-12);
      }
    }
}

TEST(AttnForward, Errors) {
  RngCursor rng(RngStream(2, 2));
  AttnInput in = random_input(3, 2, 1.0, true, rng);
  in.K = Mat(3, 3);
  EXPECT_SUS_ERROR(attn_forward(in), ErrorKind::kDimension);
  in = random_input(3, 2, -1.0, true, rng);
  EXPECT_SUS_ERROR(attn_forward(in), ErrorKind::kDomain);
}

TEST(AttnBackward, ZeroUpstreamGivesZero) {
  RngCursor rng(RngStream(3, 0));
  const AttnInput in = random_input(5, 3, 0.5, true, rng);
  const GradTriple g = attn_backward_dense(attn_forward(in), in, Mat(5, 3));
  EXPECT_EQ(max_abs(g.dQ) + max_abs(g.dK) + max_abs(g.dV), 0.0);
}

TEST(AttnBackward, SingleToken) {
  RngCursor rng(RngStream(3, 1));
  const AttnInput in = random_input(1, 2, 1.0, true, rng);
  const Mat G = normal_mat(1, 2, rng);
  const GradTriple g = attn_backward_dense(attn_forward(in), in, G);
  EXPECT_EQ(max_abs(g.dQ), 0.0);
  EXPECT_EQ(max_abs(g.dK), 0.0);
  EXPECT_EQ(g.dV, G);
}

TEST(AttnBackward, FiftyInstancesMatchFiniteDifferences) {
  RngCursor rng(RngStream(4, 0));
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + rng.below(7), d = 1 + rng.below(4);
    const double tau = k % 2 ? 1.0 : AttnInput::default_tau(d);
    const AttnInput in = random_input(n, d, tau, (k / 2) % 2 == 0, rng);
    worst = std::max(worst, attn_fd_check(in, normal_mat(n, d, rng)).max_rel_err);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(AttnBackward, ShapeMismatchIsDimensionError) {
  RngCursor rng(RngStream(4, 1));
  const AttnInput in = random_input(3, 2, 1.0, true, rng);
  EXPECT_SUS_ERROR(attn_backward_dense(attn_forward(in), in, Mat(3, 3)), ErrorKind::kDimension);
}

TEST(AttnKernelM, InvariantUnderValueTranslation) {
  RngCursor rng(RngStream(5, 0));
  AttnInput in = random_input(6, 3, 1.0, true, rng);
  const Mat G = normal_mat(6, 3, rng);
  const AttnForwardState st = attn_forward(in);
  const Mat m = attention_kernel_m(st.W, in.V, st.Vbar, G);
  const double shift[3] = {2.5, -1.0, 7.0};
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t nu = 0; nu < 3; ++nu) in.V(j, nu) += shift[nu];
  const AttnForwardState shifted = attn_forward(in);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t nu = 0; nu < 3; ++nu) EXPECT_NEAR(shifted.Vbar(i, nu), st.Vbar(i, nu) + shift[nu], 1e-12);
  EXPECT_LT(max_abs_diff(attention_kernel_m(shifted.W, in.V, shifted.Vbar, G), m), 1e-12);
}

TEST(AttnJacobians, SingleTokenValueJacobianIsIdentity) {
  RngCursor rng(RngStream(6, 0));
  const AttnInput in = random_input(1, 3, 1.0, true, rng);
  const AttnJacobians jac = attn_jacobians(attn_forward(in), in);
  for (std::size_t nu = 0; nu < 3; ++nu)
    for (std::size_t mu = 0; mu < 3; ++mu) EXPECT_EQ(jac.dVbar_dV(nu, mu), nu == mu ? 1.0 : 0.0);
}

TEST(AttnJacobians, QueryJacobianIsBlockDiagonal) {
  RngCursor rng(RngStream(6, 1));
  const std::size_t n = 5, d = 2;
  const AttnInput in = random_input(n, d, 1.0, false, rng);
  const AttnJacobians jac = attn_jacobians(attn_forward(in), in);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (i != j)
        for (std::size_t nu = 0; nu < d; ++nu)
          for (std::size_t mu = 0; mu < d; ++mu) EXPECT_EQ(jac.dVbar_dQ(j * d + nu, i * d + mu), 0.0);
}

TEST(AttnJacobians, EveryEntryMatchesFiniteDifferences) {
  RngCursor rng(RngStream(6, 2));
  const std::size_t n = 3, d = 2;
  for (bool causal : {false, true}) {
    const AttnInput in = random_input(n, d, AttnInput::default_tau(d), causal, rng);
    const AttnJacobians jac = attn_jacobians(attn_forward(in), in);
    const Mat* jacs[3] = {&jac.dVbar_dQ, &jac.dVbar_dK, &jac.dVbar_dV};
    for (int which = 0; which < 3; ++which) {
      for (std::size_t out = 0; out < n * d; ++out) {
        const ScalarFn f = [&](std::span<const double> x) {
          AttnInput p = in;
          Mat& target = which == 0 ? p.Q : which == 1 ? p.K : p.V;
          target = Mat::from_flat(n, d, {x.begin(), x.end()});
          return attn_forward(p).Vbar.flat()[out];
        };
        const Mat& src = which == 0 ? in.Q : which == 1 ? in.K : in.V;
        const auto fd = finite_diff_grad(f, src.flat());
        std::vector<double> row(jacs[which]->row(out).begin(), jacs[which]->row(out).end());
        EXPECT_LT(relative_error(row, fd), 1e-6) << "input " << which << " output " << out;
      }
    }
  }
}

TEST(AttnJacobians, ContractionReproducesDenseBackward) {
  RngCursor rng(RngStream(6, 3));
  for (bool causal : {false, true}) {
    const AttnInput in = random_input(7, 3, 0.7, causal, rng);
    const AttnForwardState st = attn_forward(in);
    const Mat G = normal_mat(7, 3, rng);
    EXPECT_LT(max_abs_diff(contract_jacobians(attn_jacobians(st, in), G), attn_backward_dense(st, in, G)),
              1e-12);
  }
}

TEST(AttnJacobians, OversizeIsCapacityError) {
  RngCursor rng(RngStream(6, 4));
  const AttnInput in = random_input(9, 2, 1.0, true, rng);
  EXPECT_SUS_ERROR(attn_jacobians(attn_forward(in), in), ErrorKind::kCapacity);
}

}  // namespace
}  // namespace sus
