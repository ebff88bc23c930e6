#include <iostream>
#include <limits>
#include <sstream>

#include "commands.hpp"
#include "json.hpp"
#include "report.hpp"
#include "sus/attention.hpp"
#include "sus/error.hpp"
#include "sus/sus_backprop.hpp"

namespace sus::cli {

namespace {

constexpr double kFdTolerance = 1e-6;
constexpr double kAllRetainedTolerance = 1e-12;
constexpr double kEnumerationTolerance = 1e-10;

Mat normal_mat(std::size_t rows, std::size_t cols, const RngStream& rng) {
  Mat m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.flat()[k] = rng.normal_at(k);
  return m;
}

std::vector<double> stacked(const GradTriple& g) {
  std::vector<double> out;
  for (const Mat* m : {&g.dQ, &g.dK, &g.dV}) out.insert(out.end(), m->flat().begin(), m->flat().end());
  return out;
}

}  // namespace

int run_gradcheck(const CommonOptions& common, const GradcheckOptions& opts) {
  require(opts.n >= 1 && opts.d >= 1, ErrorKind::kConfig, "--n and --d must be >= 1");
  require(opts.tau >= 0.0, ErrorKind::kConfig, "--tau must be >= 0");
  require(opts.c > 0.0, ErrorKind::kDomain, "--c must be > 0");
  OutputTarget out(common.output);

  const RngStream root(common.seed, stream_id_of(0x6763, opts.n, opts.d));
  AttnInput in{normal_mat(opts.n, opts.d, root.fork(0)), normal_mat(opts.n, opts.d, root.fork(1)),
               normal_mat(opts.n, opts.d, root.fork(2)),
               opts.tau > 0.0 ? opts.tau : AttnInput::default_tau(opts.d), !opts.non_causal};
  const Mat G = normal_mat(opts.n, opts.d, root.fork(3));

  const FdCheck fd = attn_fd_check(in, G);
  const AttnForwardState st = attn_forward(in);
  const GradTriple dense = attn_backward_dense(st, in, G);

  double min_w = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < opts.n; ++i)
    for (std::size_t j = 0; j < (in.causal ? i + 1 : opts.n); ++j)
      if (st.W(i, j) > 0.0) min_w = std::min(min_w, st.W(i, j));
  const MaskedWeights full = sample_mask(st.W, 2.0 / min_w, in.causal, root.fork(4));
  const double sparse_err =
      relative_error(stacked(attn_backward_sparse(full, in, st.Vbar, G)), stacked(dense));

  bool ok = fd.max_rel_err < kFdTolerance && sparse_err < kAllRetainedTolerance;
  std::vector<std::pair<std::string, double>> metrics{{"max_rel_err", fd.max_rel_err},
                                                      {"sparse_all_retained_rel_err", sparse_err}};
  if (opts.enumerate) {
    const GradTriple mean = enumerate_sparse_expectation(st, in, G, opts.c);
    const double dev = max_abs_diff(mean, dense);
    ok = ok && dev < kEnumerationTolerance;
    metrics.emplace_back("enum_max_dev", dev);
  }

  std::ostringstream text;
  for (const auto& [k, v] : metrics) text << k << '=' << num(v) << '\n';
  text << "status=" << (ok ? "ok" : "fail") << '\n';
  std::cout << text.str();
  if (!out.is_stdout()) {
    std::string content;
    if (common.format == "json") {
      nlohmann::ordered_json j;
      for (const auto& [k, v] : metrics) j[k] = v;
      j["status"] = ok ? "ok" : "fail";
      content = j.dump(2) + "\n";
    } else {
      content = csv_line({"metric", "value"});
      for (const auto& [k, v] : metrics) content += csv_line({k, num(v)});
    }
    out.commit(content);
  }
  return ok ? 0 : 1;
}

}  // namespace sus::cli
