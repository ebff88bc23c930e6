#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "json.hpp"
#include "report.hpp"
#include "sus/error.hpp"
#include "sus/kweight.hpp"
#include "sus/numerics.hpp"

namespace sus::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::kValidation, where + ": '" + s + "' is not a number");
}

struct Curves {
  std::vector<double> xi, kappa, rho;
};

Curves read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kInput, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kValidation, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = k;
  for (const char* name : {"xi", "kappa", "rho"})
    require(col.count(name) > 0, ErrorKind::kValidation, path + ": missing column '" + name + "'");
  Curves c;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    const std::string where = path + " line " + std::to_string(row);
    require(f.size() == header.size(), ErrorKind::kValidation, where + ": wrong field count");
    c.xi.push_back(parse_double(f[col["xi"]], where));
    c.kappa.push_back(parse_double(f[col["kappa"]], where));
    c.rho.push_back(parse_double(f[col["rho"]], where));
    require(c.xi.back() > 0.0, ErrorKind::kValidation, where + ": xi must be > 0");
  }
  return c;
}

std::vector<double> default_xis() {
  std::vector<double> xs;
  for (int k = 0; k <= 24; ++k) xs.push_back(std::pow(10.0, -4.0 + 5.0 * k / 24.0));
  return xs;
}

int generate(const CommonOptions& common, const KweightOptions& opts) {
  const std::vector<double> xis = opts.xi.empty() ? default_xis() : opts.xi;
  for (double x : xis) require(x > 0.0, ErrorKind::kDomain, "--xi values must be > 0");
  require(opts.n >= 1, ErrorKind::kConfig, "--n must be >= 1");
  const kweight::TwoWeightParams p{opts.theta_minus, opts.theta_plus};
  const kweight::KWeightModel m = kweight::build_two_weight(p);
  OutputTarget out(common.output);
  const double n = static_cast<double>(opts.n);
  const double s0 = kweight::sigma0(m);
  std::string content = csv_line({"c", "n", "xi", "kappa", "kappa_se", "sigma", "sigma0", "rho", "rho_se", "nnz_mean"});
  for (double x : xis) {
    const double kappa = kweight::kappa_of_xi(m, x);
    content += csv_line({num(x * n), std::to_string(opts.n), num(x), num(kappa), "0",
                         num(kweight::sigma_of_xi(m, x)), num(s0), num(kweight::rho_of_xi(m, x)), "0",
                         num(kappa * n * n)});
  }
  out.commit(content);
  if (!out.is_stdout()) std::cout << "wrote " << out.path().string() << "\n";
  return 0;
}

}  // namespace

int run_kweight(const CommonOptions& common, const KweightOptions& opts) {
  if (opts.generate == !opts.input.empty())
    throw UsageError("kweight needs exactly one of --generate or --input");
  if (opts.generate) return generate(common, opts);

  OutputTarget out(common.output);
  const Curves c = read_sweep_csv(opts.input);
  const kweight::TwoWeightFit fit = kweight::fit_two_weight(c.xi, c.kappa, c.rho);
  require(fit.ok, ErrorKind::kFit, "two-weight fit failed: " + fit.message);
  const kweight::KWeightModel m = kweight::build_two_weight(fit.params);

  std::vector<double> model_kappa, model_rho, rho_xi;
  double max_residual = 0.0;
  std::size_t residuals = 0;
  for (double x : c.xi) {
    model_kappa.push_back(kweight::kappa_of_xi(m, x));
    const double r = kweight::rho_of_xi(m, x);
    if (r > 0.0) {
      model_rho.push_back(r);
      rho_xi.push_back(x);
    }
    try {
      max_residual = std::max(max_residual, std::abs(kweight::tradeoff_check(m, x, kweight::kDefaultTradeoffStep * x)));
      ++residuals;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kStencil) throw;
    }
  }
  std::vector<std::pair<std::string, double>> metrics{
      {"theta_minus", fit.params.theta_minus}, {"theta_plus", fit.params.theta_plus},
      {"omega_minus", fit.params.omega_minus()}, {"omega_plus", fit.params.omega_plus()},
      {"objective", fit.objective}};
  if (model_kappa.size() >= 2) metrics.emplace_back("alpha_implied", fit_power_law(c.xi, model_kappa).exponent);
  if (model_rho.size() >= 2) metrics.emplace_back("beta_implied", fit_power_law(rho_xi, model_rho).exponent);
  metrics.emplace_back("tradeoff_max_residual", max_residual);
  metrics.emplace_back("tradeoff_points", static_cast<double>(residuals));

  std::ostringstream text;
  for (const auto& [k, v] : metrics) text << k << '=' << num(v) << '\n';
  std::cout << text.str();
  if (!out.is_stdout()) {
    std::string content;
    if (common.format == "json") {
      nlohmann::ordered_json j;
      for (const auto& [k, v] : metrics) j[k] = v;
      content = j.dump(2) + "\n";
    } else {
      content = csv_line({"metric", "value"});
      for (const auto& [k, v] : metrics) content += csv_line({k, num(v)});
    }
    out.commit(content);
  }
  return 0;
}

}  // namespace sus::cli
