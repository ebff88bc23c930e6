#pragma once

#include <span>
#include <string>
#include <vector>

namespace sus::kweight {

// Toy model with k distinct reduced attention weights omega_a, each with
// reduced multiplicity mu_a. Constraints: sum mu = 1 and sum mu*omega = 1.
struct KWeightModel {
  std::vector<double> omegas;  // strictly ascending, positive
  std::vector<double> mus;     // positive

  std::size_t k() const noexcept { return omegas.size(); }
  void validate(double tol = 1e-12) const;
  // Breakpoints 1/omega_a in ascending order.
  std::vector<double> kinks() const;
};

// Sorts by omega and rescales arbitrary positive omegas and mus so that both
// constraints hold.
KWeightModel make_model(std::vector<double> omegas, std::vector<double> mus);

struct TwoWeightParams {
  double theta_minus = 0.0;
  double theta_plus = 0.0;

  double omega_minus() const;  // exp(-exp(theta_minus)), in (0, 1)
  double omega_plus() const;   // exp(+exp(theta_plus)), > 1
};

KWeightModel build_two_weight(const TwoWeightParams& p);

// Reduced retention: sum_a mu_a min(xi omega_a, 1).
double kappa_of_xi(const KWeightModel& m, double xi);
// Reduced variance: sum_a mu_a omega_a^2 / min(xi omega_a, 1).
double sigma_of_xi(const KWeightModel& m, double xi);
// Large-xi limit of sigma_of_xi: sum_a mu_a omega_a^2.
double sigma0(const KWeightModel& m);
// (Sigma - Sigma0) / Sigma0.
double rho_of_xi(const KWeightModel& m, double xi);

// Piecewise closed forms of the two-weight model in terms of omega_pm.
double kappa_two_weight_closed(const TwoWeightParams& p, double xi);
double sigma_two_weight_closed(const TwoWeightParams& p, double xi);

inline constexpr double kDefaultTradeoffStep = 1e-6;

// dkappa/dxi + xi^2 dSigma/dxi by central differences. Throws a stencil error
// if a kink lies inside [xi - h, xi + h].
double tradeoff_check(const KWeightModel& m, double xi, double h = kDefaultTradeoffStep);

// Sum of squared residuals: relative (linear) residuals on kappa and log
// residuals on rho. Points with non-positive rho data are skipped in the rho
// term.
double two_weight_objective(const TwoWeightParams& p, std::span<const double> xis,
                            std::span<const double> kappas, std::span<const double> rhos);

struct TwoWeightFit {
  bool ok = false;
  TwoWeightParams params;
  double objective = 0.0;
  std::string message;
};

// Deterministic 21 x 21 multi-start grid on [-2, 3]^2 followed by Nelder-Mead
// refinement. Degenerate data yields ok == false with a message.
TwoWeightFit fit_two_weight(std::span<const double> xis, std::span<const double> kappas,
                            std::span<const double> rhos);

}  // namespace sus::kweight
