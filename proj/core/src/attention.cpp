#include "sus/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sus/error.hpp"
#include "sus/numerics.hpp"

namespace sus {

void AttnInput::validate() const {
  require(Q.rows() >= 1 && Q.cols() >= 1, ErrorKind::kDimension, "attention needs n >= 1, d >= 1");
  require(K.same_shape(Q) && V.same_shape(Q), ErrorKind::kDimension,
          "Q, K and V must share n and d");
  require(tau > 0.0 && std::isfinite(tau), ErrorKind::kDomain, "logit scale must be positive");
}

double attn_probe_loss(const AttnInput& input, const Mat& G) {
  const AttnForwardState st = attn_forward(input);
  require(G.same_shape(st.Vbar), ErrorKind::kDimension, "probe G must be n x d");
  double total = 0.0;
  for (std::size_t k = 0; k < G.size(); ++k) total += G.flat()[k] * st.Vbar.flat()[k];
  return total;
}

FdCheck attn_fd_check(const AttnInput& input, const Mat& G, double h) {
  input.validate();
  const std::size_t nd = input.Q.size();
  std::vector<double> x;
  x.reserve(3 * nd);
  for (const Mat* m : {&input.Q, &input.K, &input.V}) x.insert(x.end(), m->flat().begin(), m->flat().end());
  const ScalarFn f = [&](std::span<const double> p) {
    AttnInput in = input;
    in.Q = Mat::from_flat(input.n(), input.d(), {p.begin(), p.begin() + nd});
    in.K = Mat::from_flat(input.n(), input.d(), {p.begin() + nd, p.begin() + 2 * nd});
    in.V = Mat::from_flat(input.n(), input.d(), {p.begin() + 2 * nd, p.end()});
    return attn_probe_loss(in, G);
  };
  const std::vector<double> fd = finite_diff_grad(f, x, h);
  const GradTriple g = attn_backward_dense(attn_forward(input), input, G);
  std::vector<double> analytic;
  analytic.reserve(3 * nd);
  for (const Mat* m : {&g.dQ, &g.dK, &g.dV}) analytic.insert(analytic.end(), m->flat().begin(), m->flat().end());
  FdCheck r;
  for (std::size_t k = 0; k < fd.size(); ++k) r.max_abs_err = std::max(r.max_abs_err, std::abs(fd[k] - analytic[k]));
  r.max_rel_err = relative_error(analytic, fd);
  return r;
}

double max_abs_diff(const GradTriple& a, const GradTriple& b) {
  return std::max({max_abs_diff(a.dQ, b.dQ), max_abs_diff(a.dK, b.dK), max_abs_diff(a.dV, b.dV)});
}

AttnForwardState attn_forward(const AttnInput& input) {
  input.validate();
  AttnForwardState st;
  st.S = matmul_nt(input.Q, input.K);
  st.S *= input.tau;
  if (input.causal) {
    for (std::size_t i = 0; i < st.S.rows(); ++i)
      for (std::size_t j = i + 1; j < st.S.cols(); ++j) st.S(i, j) = 0.0;
  }
  st.W = row_softmax(st.S, input.causal);
  st.Vbar = matmul(st.W, input.V);
  return st;
}

Mat attention_kernel_m(const Mat& W, const Mat& V, const Mat& Vbar, const Mat& dVbar) {
  const std::size_t n = W.rows();
  require(W.cols() == n && V.rows() == n && Vbar.same_shape(V) && dVbar.same_shape(V),
          ErrorKind::kDimension, "attention kernel shape mismatch");
  const std::size_t d = V.cols();
  Mat M(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto g = dVbar.row(i);
    auto vb = Vbar.row(i);
    double vbar_dot_g = 0.0;
    for (std::size_t nu = 0; nu < d; ++nu) vbar_dot_g += vb[nu] * g[nu];
    for (std::size_t j = 0; j < n; ++j) {
      const double w = W(i, j);
      if (w == 0.0) continue;
      auto v = V.row(j);
      double v_dot_g = 0.0;
      for (std::size_t nu = 0; nu < d; ++nu) v_dot_g += v[nu] * g[nu];
      M(i, j) = w * (v_dot_g - vbar_dot_g);
    }
  }
  return M;
}

GradTriple attn_backward_dense(const AttnForwardState& state, const AttnInput& input,
                               const Mat& dVbar) {
  input.validate();
  const std::size_t n = input.n();
  require(state.W.rows() == n && state.W.cols() == n && state.Vbar.same_shape(input.V),
          ErrorKind::kDimension, "forward state does not match input");
  require(dVbar.same_shape(input.V), ErrorKind::kDimension, "dVbar must be n x d");

  const Mat M = attention_kernel_m(state.W, input.V, state.Vbar, dVbar);
  GradTriple g;
  g.dQ = matmul(M, input.K);
  g.dQ *= input.tau;
  g.dK = matmul_tn(M, input.Q);
  g.dK *= input.tau;
  g.dV = matmul_tn(state.W, dVbar);
  return g;
}

AttnJacobians attn_jacobians(const AttnForwardState& state, const AttnInput& input) {
  input.validate();
  const std::size_t n = input.n();
  const std::size_t d = input.d();
  require(n <= kMaxJacobianN && d <= kMaxJacobianD, ErrorKind::kCapacity,
          "dense Jacobians are limited to n <= 8, d <= 4");
  const Mat& W = state.W;
  const Mat& V = input.V;
  const Mat& Vb = state.Vbar;
  const double tau = input.tau;

  AttnJacobians jac{Mat(n * d, n * d), Mat(n * d, n * d), Mat(n * d, n * d)};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t nu = 0; nu < d; ++nu) {
      const std::size_t out = j * d + nu;
      // d Vbar_j,nu / d Q_i,mu is nonzero only for i == j.
      for (std::size_t mu = 0; mu < d; ++mu) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += W(j, k) * (V(k, nu) - Vb(j, nu)) * input.K(k, mu);
        jac.dVbar_dQ(out, j * d + mu) = tau * acc;
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t mu = 0; mu < d; ++mu) {
          jac.dVbar_dK(out, i * d + mu) = tau * W(j, i) * (V(i, nu) - Vb(j, nu)) * input.Q(j, mu);
        }
        jac.dVbar_dV(out, i * d + nu) = W(j, i);
      }
    }
  }
  return jac;
}

GradTriple contract_jacobians(const AttnJacobians& jac, const Mat& dVbar) {
  const std::size_t n = dVbar.rows();
  const std::size_t d = dVbar.cols();
  require(jac.dVbar_dQ.rows() == n * d, ErrorKind::kDimension, "Jacobian and dVbar disagree");
  auto contract = [&](const Mat& J) {
    Mat out(n, d);
    auto g = dVbar.flat();
    for (std::size_t r = 0; r < n * d; ++r) {
      if (g[r] == 0.0) continue;
      auto jr = J.row(r);
      auto o = out.flat();
      for (std::size_t c = 0; c < n * d; ++c) o[c] += g[r] * jr[c];
    }
    return out;
  };
  return GradTriple{contract(jac.dVbar_dQ), contract(jac.dVbar_dK), contract(jac.dVbar_dV)};
}

}  // namespace sus
