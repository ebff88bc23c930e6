#pragma once

#include <cmath>
#include <cstddef>

#include "sus/mat.hpp"
#include "sus/numerics.hpp"

namespace sus {

// Inputs of one attention head. Logits are tau * Q K^T; tau = 1 gives plain
// softmax(Q K^T), tau = 1/sqrt(d) the usual scaled dot product.
struct AttnInput {
  Mat Q;
  Mat K;
  Mat V;
  double tau = 1.0;
  bool causal = true;

  std::size_t n() const noexcept { return Q.rows(); }
  std::size_t d() const noexcept { return Q.cols(); }

  static double default_tau(std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d)); }
  void validate() const;
};

struct AttnForwardState {
  Mat S;     // n x n logits
  Mat W;     // n x n attention weights
  Mat Vbar;  // n x d outputs, W V
};

struct GradTriple {
  Mat dQ;
  Mat dK;
  Mat dV;
};

double max_abs_diff(const GradTriple& a, const GradTriple& b);

AttnForwardState attn_forward(const AttnInput& input);

// M_ij = W_ij * sum_nu (V_j,nu - Vbar_i,nu) * dVbar_i,nu
Mat attention_kernel_m(const Mat& W, const Mat& V, const Mat& Vbar, const Mat& dVbar);

// Exact gradients of the loss with respect to Q, K, V given dL/dVbar:
// dQ = tau M K, dK = tau M^T Q, dV = W^T dVbar.
GradTriple attn_backward_dense(const AttnForwardState& state, const AttnInput& input,
                               const Mat& dVbar);

// L = sum G .* Vbar, a linear probe whose dL/dVbar is G.
double attn_probe_loss(const AttnInput& input, const Mat& G);

struct FdCheck {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;  // relative_error over the 3nd stacked components
};

// attn_backward_dense against central differences of attn_probe_loss over Q, K, V.
FdCheck attn_fd_check(const AttnInput& input, const Mat& G, double h = kDefaultFdStep);

inline constexpr std::size_t kMaxJacobianN = 8;
inline constexpr std::size_t kMaxJacobianD = 4;

// Dense Jacobians of Vbar with respect to each input. Row index is the output
// element (j, nu) flattened as j*d + nu, column index the input element
// (i, mu) flattened as i*d + mu.
struct AttnJacobians {
  Mat dVbar_dQ;
  Mat dVbar_dK;
  Mat dVbar_dV;
};

AttnJacobians attn_jacobians(const AttnForwardState& state, const AttnInput& input);

// Contracts the Jacobians with an upstream gradient dL/dVbar.
GradTriple contract_jacobians(const AttnJacobians& jac, const Mat& dVbar);

}  // namespace sus
