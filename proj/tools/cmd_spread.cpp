#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "json.hpp"
#include "report.hpp"
#include "sus/error.hpp"
#include "sus/spread.hpp"
#include "sus/weight_dump.hpp"

namespace sus::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int run_spread(const CommonOptions& common, const ModelOptions& model, const SpreadOptions& opts) {
  if (common.output.empty()) throw UsageError("spread needs -o <directory>");
  const spread::SpreadConfig cfg{opts.p};
  cfg.validate();
  const bool from_toy = opts.manifest.empty();
  lab::ToyModelConfig toy;
  if (from_toy) {
    toy = toy_config(model, common.seed, opts.n);
    require(opts.sequences >= 1, ErrorKind::kArity, "--sequences must be >= 1");
  }
  const fs::path dir = common.output;
  fs::create_directories(dir);

  fs::path manifest = opts.manifest;
  if (from_toy) {
    const lab::ToyModelParams params = lab::build_toy_model(toy);
    lab::SweepOptions so;
    so.source = sequence_source(model);
    so.topic_size = model.topic_size;
    so.sequences = opts.sequences;
    so.seed = common.seed;
    manifest = lab::dump_attention(params, lab::make_sequences(toy, opts.n, so), dir / "dump");
  }
  const dump::WeightDump d = dump::load_weight_dump(manifest);
  const std::size_t ref = opts.ref_position < 0 ? d.n - 1 : static_cast<std::size_t>(opts.ref_position);
  require(ref >= 1 && ref < d.n, ErrorKind::kUndefinedPosition,
          "reference position must lie in [1, n-1], got " + std::to_string(ref));

  std::string table = csv_line({"layer", "head", "position", "s", "phi"});
  std::string strided = csv_line({"layer", "head", "position", "mean_s"});
  std::string heads = csv_line({"layer", "head", "phi_ref", "max_raw_row_sum_dev"});
  ordered_json j;
  j["model"] = d.model;
  j["n"] = d.n;
  j["p"] = cfg.p;
  j["ref_position"] = ref;
  j["heads"] = ordered_json::array();
  std::vector<double> phis;
  for (const auto& e : d.entries) {
    const spread::SpreadReport r = spread::spread_profile(e.W, cfg);
    double raw_dev = 0.0;
    for (double v : e.raw_row_sums) raw_dev = std::max(raw_dev, std::abs(v - 1.0));
    const std::string l = std::to_string(e.layer), h = std::to_string(e.head);
    ordered_json hj;
    hj["layer"] = e.layer;
    hj["head"] = e.head;
    hj["s"] = r.s;
    hj["phi"] = ordered_json::array();
    for (std::size_t i = 0; i < r.positions; ++i) {
      table += csv_line({l, h, std::to_string(i), std::to_string(r.s[i]), r.phi[i] ? num(*r.phi[i]) : ""});
      hj["phi"].push_back(r.phi[i] ? ordered_json(*r.phi[i]) : ordered_json(nullptr));
    }
    hj["strided"] = ordered_json::array();
    for (const auto& b : spread::strided_spread(r.s)) {
      strided += csv_line({l, h, std::to_string(b.position), num(b.mean_s)});
      hj["strided"].push_back({{"position", b.position}, {"mean_s", b.mean_s}});
    }
    const double phi_ref = *r.phi[ref];
    phis.push_back(phi_ref);
    heads += csv_line({l, h, num(phi_ref), num(raw_dev)});
    hj["phi_ref"] = phi_ref;
    hj["max_raw_row_sum_dev"] = raw_dev;
    j["heads"].push_back(hj);
  }
  const spread::HeadSpreadStats stats = spread::head_spread_stats(phis);
  ordered_json summary;
  summary["arithmetic_mean"] = stats.arithmetic_mean;
  summary["geometric_mean"] = stats.geometric_mean;
  summary["log2_histogram"] = ordered_json::array();
  for (const auto& b : stats.log2_histogram)
    summary["log2_histogram"].push_back({{"lower", b.lower}, {"upper", b.upper}, {"count", b.count}});
  j["summary"] = summary;

  if (common.format == "json") {
    OutputTarget(dir / "spread.json").commit(j.dump(2) + "\n");
  } else {
    OutputTarget(dir / "spread.csv").commit(table);
    OutputTarget(dir / "spread_strided.csv").commit(strided);
    OutputTarget(dir / "heads.csv").commit(heads);
    ordered_json sj = summary;
    sj["model"] = d.model;
    sj["n"] = d.n;
    sj["p"] = cfg.p;
    sj["ref_position"] = ref;
    OutputTarget(dir / "summary.json").commit(sj.dump(2) + "\n");
  }
  std::cout << "heads=" << phis.size() << "\nref_position=" << ref
            << "\nphi_arithmetic_mean=" << num(stats.arithmetic_mean)
            << "\nphi_geometric_mean=" << num(stats.geometric_mean) << "\nwrote " << dir.string() << "\n";
  return 0;
}

}  // namespace sus::cli
