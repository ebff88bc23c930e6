#include "sus/kweight.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "sus/error.hpp"

namespace sus::kweight {

void KWeightModel::validate(double tol) const {
  require(!omegas.empty() && omegas.size() == mus.size(), ErrorKind::kValidation,
          "k-weight model needs matching, non-empty omegas and mus");
  double sum_mu = 0.0, sum_mu_omega = 0.0;
  for (std::size_t a = 0; a < omegas.size(); ++a) {
    require(omegas[a] > 0.0 && std::isfinite(omegas[a]), ErrorKind::kValidation,
            "omegas must be positive and finite");
    require(mus[a] > 0.0, ErrorKind::kValidation, "mus must be positive");
    if (a > 0)
      require(omegas[a] > omegas[a - 1], ErrorKind::kValidation, "omegas must be strictly ascending");
    sum_mu += mus[a];
    sum_mu_omega += mus[a] * omegas[a];
  }
  require(std::abs(sum_mu - 1.0) <= tol, ErrorKind::kValidation, "multiplicities must sum to 1");
  require(std::abs(sum_mu_omega - 1.0) <= tol, ErrorKind::kValidation, "weights must sum to 1");
}

std::vector<double> KWeightModel::kinks() const {
  std::vector<double> out;
  out.reserve(omegas.size());
  for (auto it = omegas.rbegin(); it != omegas.rend(); ++it) out.push_back(1.0 / *it);
  return out;
}

KWeightModel make_model(std::vector<double> omegas, std::vector<double> mus) {
  require(!omegas.empty() && omegas.size() == mus.size(), ErrorKind::kValidation,
          "make_model needs matching, non-empty omegas and mus");
  std::vector<std::size_t> order(omegas.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return omegas[a] < omegas[b]; });
  KWeightModel m;
  for (auto idx : order) {
    m.omegas.push_back(omegas[idx]);
    m.mus.push_back(mus[idx]);
  }
  // Scaling mu by 1/sum(mu) and omega by sum(mu)/sum(mu omega) meets both
  // constraints without changing the shape of the distribution.
  const double sum_mu = std::accumulate(m.mus.begin(), m.mus.end(), 0.0);
  for (double& mu : m.mus) mu /= sum_mu;
  double sum_mu_omega = 0.0;
  for (std::size_t a = 0; a < m.k(); ++a) sum_mu_omega += m.mus[a] * m.omegas[a];
  for (double& w : m.omegas) w /= sum_mu_omega;
  m.validate(1e-12);
  return m;
}

double TwoWeightParams::omega_minus() const { return std::exp(-std::exp(theta_minus)); }
double TwoWeightParams::omega_plus() const { return std::exp(std::exp(theta_plus)); }

KWeightModel build_two_weight(const TwoWeightParams& p) {
  const double wm = p.omega_minus();
  const double wp = p.omega_plus();
  KWeightModel m;
  m.omegas = {wm, wp};
  m.mus = {(1.0 - wp) / (wm - wp), (1.0 - wm) / (wp - wm)};
  return m;
}

namespace {

void require_xi(double xi) {
  require(xi > 0.0 && std::isfinite(xi), ErrorKind::kDomain, "xi must be positive");
}

}  // namespace

double kappa_of_xi(const KWeightModel& m, double xi) {
  require_xi(xi);
  double kappa = 0.0;
  for (std::size_t a = 0; a < m.k(); ++a) kappa += m.mus[a] * std::min(xi * m.omegas[a], 1.0);
  return kappa;
}

double sigma_of_xi(const KWeightModel& m, double xi) {
  require_xi(xi);
  double sigma = 0.0;
  for (std::size_t a = 0; a < m.k(); ++a) {
    const double q = std::min(xi * m.omegas[a], 1.0);
    sigma += m.mus[a] * m.omegas[a] * m.omegas[a] / q;
  }
  return sigma;
}

double sigma0(const KWeightModel& m) {
  double s = 0.0;
  for (std::size_t a = 0; a < m.k(); ++a) s += m.mus[a] * m.omegas[a] * m.omegas[a];
  return s;
}

double rho_of_xi(const KWeightModel& m, double xi) {
  const double s0 = sigma0(m);
  return (sigma_of_xi(m, xi) - s0) / s0;
}

double kappa_two_weight_closed(const TwoWeightParams& p, double xi) {
  require_xi(xi);
  const double wm = p.omega_minus();
  const double wp = p.omega_plus();
  if (xi <= 1.0 / wp) return xi;
  if (xi >= 1.0 / wm) return 1.0;
  return xi * (wp - 1.0) * wm / (wp - wm) + (1.0 - wm) / (wp - wm);
}

double sigma_two_weight_closed(const TwoWeightParams& p, double xi) {
  require_xi(xi);
  const double wm = p.omega_minus();
  const double wp = p.omega_plus();
  if (xi <= 1.0 / wp) return 1.0 / xi;
  if (xi >= 1.0 / wm) return wp * (1.0 - wm) + wm;
  return (wp - 1.0) * wm / (xi * (wp - wm)) + wp * wp * (1.0 - wm) / (wp - wm);
}

double tradeoff_check(const KWeightModel& m, double xi, double h) {
  require_xi(xi);
  require(h > 0.0 && xi - h > 0.0, ErrorKind::kStencil, "stencil must stay in xi > 0");
  for (double kink : m.kinks())
    require(kink < xi - h || kink > xi + h, ErrorKind::kStencil,
            "kink at xi = " + std::to_string(kink) + " inside the stencil");
  // Differencing term by term keeps the constant (fully retained) terms from
  // contributing rounding noise.
  double dkappa = 0.0, dsigma = 0.0;
  for (std::size_t a = 0; a < m.k(); ++a) {
    const double w = m.omegas[a];
    const double qp = std::min((xi + h) * w, 1.0);
    const double qm = std::min((xi - h) * w, 1.0);
    dkappa += m.mus[a] * (qp - qm);
    dsigma += m.mus[a] * w * w * (1.0 / qp - 1.0 / qm);
  }
  dkappa /= 2.0 * h;
  dsigma /= 2.0 * h;
  return dkappa + xi * xi * dsigma;
}

double two_weight_objective(const TwoWeightParams& p, std::span<const double> xis,
                            std::span<const double> kappas, std::span<const double> rhos) {
  constexpr double kBad = 1e300;
  const double wm = p.omega_minus();
  const double wp = p.omega_plus();
  if (!(wm > 0.0) || !(wp < std::numeric_limits<double>::infinity()) || !(wp > wm)) return kBad;
  const KWeightModel m = build_two_weight(p);
  const double s0 = sigma0(m);
  if (!std::isfinite(s0) || s0 <= 0.0) return kBad;

  double total = 0.0;
  for (std::size_t i = 0; i < xis.size(); ++i) {
    const double kappa = kappa_of_xi(m, xis[i]);
    const double rk = (kappa - kappas[i]) / kappas[i];
    total += rk * rk;
    if (rhos[i] > 0.0) {
      const double rho = (sigma_of_xi(m, xis[i]) - s0) / s0;
      // Fully retained regime gives rho = 0; treat it as a large log miss.
      const double lr = std::log(std::max(rho, 1e-300)) - std::log(rhos[i]);
      total += lr * lr;
    }
  }
  return std::isfinite(total) ? total : kBad;
}

namespace {

using Point = std::array<double, 2>;

template <typename F>
Point nelder_mead(F&& f, Point start, double step, int max_iter, double ftol) {
  std::array<Point, 3> s{start, start, start};
  s[1][0] += step;
  s[2][1] += step;
  std::array<double, 3> fv{f(s[0]), f(s[1]), f(s[2])};
  for (int it = 0; it < max_iter; ++it) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = idx[0], mid = idx[1], worst = idx[2];
    if (std::abs(fv[worst] - fv[best]) <= ftol * (std::abs(fv[best]) + 1e-300) &&
        std::abs(s[worst][0] - s[best][0]) + std::abs(s[worst][1] - s[best][1]) < 1e-13)
      break;
    const Point centroid{(s[best][0] + s[mid][0]) / 2, (s[best][1] + s[mid][1]) / 2};
    auto along = [&](double t) {
      return Point{centroid[0] + t * (s[worst][0] - centroid[0]),
                   centroid[1] + t * (s[worst][1] - centroid[1])};
    };
    const Point refl = along(-1.0);
    const double fr = f(refl);
    if (fr < fv[best]) {
      const Point exp = along(-2.0);
      const double fe = f(exp);
      if (fe < fr) {
        s[worst] = exp;
        fv[worst] = fe;
      } else {
        s[worst] = refl;
        fv[worst] = fr;
      }
    } else if (fr < fv[mid]) {
      s[worst] = refl;
      fv[worst] = fr;
    } else {
      const Point con = fr < fv[worst] ? along(-0.5) : along(0.5);
      const double fc = f(con);
      if (fc < std::min(fr, fv[worst])) {
        s[worst] = con;
        fv[worst] = fc;
      } else {
        for (int v : {mid, worst}) {
          s[v] = Point{(s[v][0] + s[best][0]) / 2, (s[v][1] + s[best][1]) / 2};
          fv[v] = f(s[v]);
        }
      }
    }
  }
  const int best = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return s[best];
}

bool all_equal(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

TwoWeightFit fit_two_weight(std::span<const double> xis, std::span<const double> kappas,
                            std::span<const double> rhos) {
  TwoWeightFit fit;
  if (xis.size() != kappas.size() || xis.size() != rhos.size()) {
    fit.message = "xis, kappas and rhos differ in length";
    return fit;
  }
  if (xis.size() < 4) {
    fit.message = "two-weight fit needs at least 4 points";
    return fit;
  }
  for (std::size_t i = 0; i < xis.size(); ++i) {
    if (!(xis[i] > 0.0) || !(kappas[i] > 0.0)) {
      fit.message = "xis and kappas must be positive (point " + std::to_string(i) + ")";
      return fit;
    }
  }
  if (all_equal(kappas) || all_equal(rhos)) {
    fit.message = "degenerate data: constant kappa or rho curve";
    return fit;
  }
  if (std::none_of(rhos.begin(), rhos.end(), [](double r) { return r > 0.0; })) {
    fit.message = "degenerate data: no positive rho values";
    return fit;
  }

  auto objective = [&](const Point& t) {
    return two_weight_objective(TwoWeightParams{t[0], t[1]}, xis, kappas, rhos);
  };
  constexpr int kGrid = 21;
  constexpr double kLo = -2.0, kHi = 3.0;
  Point best{0.0, 0.0};
  double best_f = std::numeric_limits<double>::infinity();
  for (int a = 0; a < kGrid; ++a) {
    for (int b = 0; b < kGrid; ++b) {
      const Point t{kLo + (kHi - kLo) * a / (kGrid - 1), kLo + (kHi - kLo) * b / (kGrid - 1)};
      const double f = objective(t);
      if (f < best_f) {
        best_f = f;
        best = t;
      }
    }
  }
  // Restarting from the previous optimum with a smaller simplex guards
  // against a collapsed simplex.
  Point x = best;
  for (double step : {0.25, 0.05, 0.01}) x = nelder_mead(objective, x, step, 4000, 1e-15);

  fit.params = TwoWeightParams{x[0], x[1]};
  fit.objective = objective(x);
  fit.ok = fit.objective < 1e299;
  if (!fit.ok) fit.message = "objective not finite at any start";
  return fit;
}

}  // namespace sus::kweight
