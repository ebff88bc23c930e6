#include <iostream>
#include <memory>

#include "commands.hpp"
#include "json.hpp"
#include "report.hpp"
#include "sus/error.hpp"

namespace sus::cli {

namespace {

const std::vector<std::string> kHeader{"c", "n", "xi", "kappa", "kappa_se", "sigma",
                                       "sigma0", "rho", "rho_se", "nnz_mean"};

std::vector<double> row_values(const lab::VarianceReport& r) {
  return {r.c, static_cast<double>(r.n), r.xi, r.kappa, r.kappa_se, r.sigma,
          r.sigma0, r.rho, r.rho_se, r.nnz_mean};
}

nlohmann::ordered_json fit_json(const lab::SweepFit& f) {
  nlohmann::ordered_json j;
  j["alpha"] = f.alpha;
  j["beta"] = f.beta;
  j["alpha_minus_beta"] = f.gap;
  j["kappa_log_prefactor"] = f.kappa.log_prefactor;
  j["kappa_r_squared"] = f.kappa.r_squared;
  j["rho_log_prefactor"] = f.rho.log_prefactor;
  j["rho_r_squared"] = f.rho.r_squared;
  j["cells_used"] = f.cells_used;
  return j;
}

}  // namespace

int run_sweep(const CommonOptions& common, const ModelOptions& model, const SweepCliOptions& opts) {
  std::vector<lab::SweepCell> cells;
  if (opts.mode == "c") {
    if (opts.n.size() != 1) throw UsageError("--mode c takes exactly one --n value");
    for (double c : opts.c) cells.push_back({c, opts.n.front()});
  } else {
    if (opts.c.size() != 1) throw UsageError("--mode n takes exactly one --c value");
    for (std::size_t n : opts.n) cells.push_back({opts.c.front(), n});
  }
  if (cells.empty()) throw UsageError("sweep needs at least one cell");
  for (const auto& cell : cells) {
    require(cell.c > 0.0, ErrorKind::kDomain, "every c must be > 0");
    toy_config(model, common.seed, cell.n);
  }
  require(opts.sequences >= 2, ErrorKind::kArity, "--sequences must be >= 2");
  require(opts.samples >= 1, ErrorKind::kArity, "--samples must be >= 1");

  lab::SweepOptions so;
  so.source = sequence_source(model);
  so.topic_size = model.topic_size;
  so.sequences = opts.sequences;
  so.samples_per_sequence = opts.samples;
  so.seed = common.seed;
  so.threads = common.threads;
  so.fit = opts.fit == "on" || (opts.fit == "auto" && opts.mode == "c" && cells.size() >= lab::kMinFitCells);
  if (so.fit)
    require(cells.size() >= lab::kMinFitCells, ErrorKind::kFit,
            "power-law fit needs at least " + std::to_string(lab::kMinFitCells) + " cells, got " +
                std::to_string(cells.size()));

  OutputTarget out(common.output);
  std::unique_ptr<OutputTarget> sidecar;
  if (so.fit && !out.is_stdout() && common.format == "csv")
    sidecar = std::make_unique<OutputTarget>(common.output + ".fit.json");

  lab::SweepProgress progress;
  if (opts.progress)
    progress = [](std::size_t done, std::size_t total) {
      std::cerr << "cell " << done << "/" << total << " done\n";
    };
  const lab::SweepResult result = lab::sweep_and_fit(toy_config(model, common.seed, cells.front().n),
                                                     cells, so, progress);

  std::string content;
  if (common.format == "json") {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : result.reports) {
      nlohmann::ordered_json row;
      const auto values = row_values(r);
      for (std::size_t k = 0; k < kHeader.size(); ++k) row[kHeader[k]] = values[k];
      j["rows"].push_back(row);
    }
    j["fit"] = result.fit ? fit_json(*result.fit) : nlohmann::ordered_json(nullptr);
    content = j.dump(2) + "\n";
  } else {
    content = csv_line(kHeader);
    for (const auto& r : result.reports) {
      std::vector<std::string> fields;
      for (double v : row_values(r)) fields.push_back(num(v));
      fields[1] = std::to_string(r.n);
      content += csv_line(fields);
    }
  }
  out.commit(content);

  std::ostream& info = out.is_stdout() ? std::cerr : std::cout;
  if (!out.is_stdout()) info << "wrote " << out.path().string() << "\n";
  if (result.fit) {
    info << "alpha=" << num(result.fit->alpha) << "\nbeta=" << num(result.fit->beta)
         << "\nalpha_minus_beta=" << num(result.fit->gap) << "\n";
    if (sidecar) {
      sidecar->commit(fit_json(*result.fit).dump(2) + "\n");
      info << "wrote " << sidecar->path().string() << "\n";
    }
  }
  return 0;
}

}  // namespace sus::cli
