#include "sus/variance_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "sus/error.hpp"
#include "sus/weight_dump.hpp"

namespace sus::lab {

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct SequenceMoments {
  MomentSums dense;        // the dense gradient
  MomentSums masked_mean;  // mean of the masked gradients
  double within = 0.0;     // mean component variance among the masked gradients
  double retained_rows_sum = 0.0;  // sum over samples of nnz / mask_rows
  double nnz_per_mask_sum = 0.0;
};

}  // namespace

VarianceReport estimate_variance(const ToyModelParams& params, std::span<const Sequence> sequences,
                                 GradMode mode, double c, const EstimateOptions& opts) {
  require(sequences.size() >= 2, ErrorKind::kArity, "variance estimate needs at least 2 sequences");
  require(opts.samples_per_sequence >= 1, ErrorKind::kArity, "need at least 1 sample per sequence");
  if (mode == GradMode::kSus) require(c > 0.0, ErrorKind::kDomain, "sus mode needs c > 0");
  const std::size_t n = sequences.front().size();
  for (const auto& s : sequences) {
    require(s.size() == n, ErrorKind::kDimension, "all sequences must share one length");
    validate_tokens(params.config, s);
  }
  const std::size_t S = sequences.size();
  const std::size_t K = opts.samples_per_sequence;
  const std::size_t heads_layers = params.config.heads * params.config.layers;

  // Shifting by one dense gradient keeps the moment sums well conditioned.
  const ForwardCache first = model_forward(params, sequences[0]);
  const std::vector<double> shift =
      model_backward(params, first, sequences[0], GradMode::kDense, c, RngStream(0, 0)).grad;

  std::vector<SequenceMoments> per_seq(S);
  parallel_for(S, opts.threads, [&](std::size_t s) {
    SequenceMoments m{MomentSums(shift), MomentSums(shift)};
    const ForwardCache cache = model_forward(params, sequences[s]);
    const std::vector<double> dense =
        model_backward(params, cache, sequences[s], GradMode::kDense, c, RngStream(0, 0)).grad;
    m.dense.add(dense);
    MomentSums group(dense);
    std::vector<double> mean(dense.size(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const RngStream rng(opts.base_seed, stream_id_of(s, k));
      const ModelGrad g = model_backward(params, cache, sequences[s], mode, c, rng);
      group.add(g.grad);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g.grad[i];
      m.retained_rows_sum += static_cast<double>(g.nnz) / static_cast<double>(g.mask_rows);
      m.nnz_per_mask_sum += static_cast<double>(g.nnz) / static_cast<double>(heads_layers);
    }
    for (double& v : mean) v /= static_cast<double>(K);
    m.masked_mean.add(mean);
    if (K >= 2) m.within = group.mean_component_variance();
    per_seq[s] = std::move(m);
  });

  // Pairs sharing a sequence are correlated, so the pooled sample variance is
  // biased low. Between-sequence variance of the group means plus the
  // (1 - 1/K) share of the within-sequence variance is unbiased.
  MomentSums dense_total(shift), mean_total(shift);
  double within_total = 0.0, retained_total = 0.0, nnz_total = 0.0;
  for (const auto& m : per_seq) {
    dense_total.merge(m.dense);
    mean_total.merge(m.masked_mean);
    within_total += m.within;
    retained_total += m.retained_rows_sum;
    nnz_total += m.nnz_per_mask_sum;
  }
  const double within_weight = 1.0 - 1.0 / static_cast<double>(K);
  const double dn = static_cast<double>(n);
  auto rho_of = [](double sigma, double sigma0) { return sigma0 > 0.0 ? (sigma - sigma0) / sigma0 : 0.0; };

  VarianceReport r;
  r.c = c;
  r.n = n;
  r.xi = c / dn;
  r.sequences = S;
  r.samples_per_sequence = K;
  r.sigma0 = dense_total.mean_component_variance();
  r.sigma = mean_total.mean_component_variance() +
            within_weight * within_total / static_cast<double>(S);
  r.rho = rho_of(r.sigma, r.sigma0);
  r.kappa = retained_total / static_cast<double>(S * K) / dn;
  r.nnz_mean = nnz_total / static_cast<double>(S * K);

  if (S >= 3) {
    std::vector<double> loo_sigma(S), loo_sigma0(S), loo_rho(S), loo_kappa(S);
    for (std::size_t s = 0; s < S; ++s) {
      loo_sigma0[s] = dense_total.mean_component_variance_without(per_seq[s].dense);
      loo_sigma[s] = mean_total.mean_component_variance_without(per_seq[s].masked_mean) +
                     within_weight * (within_total - per_seq[s].within) / static_cast<double>(S - 1);
      loo_rho[s] = rho_of(loo_sigma[s], loo_sigma0[s]);
      loo_kappa[s] = (retained_total - per_seq[s].retained_rows_sum) /
                     static_cast<double>((S - 1) * K) / dn;
    }
    r.sigma_se = jackknife_se(loo_sigma);
    r.sigma0_se = jackknife_se(loo_sigma0);
    r.rho_se = jackknife_se(loo_rho);
    r.kappa_se = jackknife_se(loo_kappa);
  }
  return r;
}

SweepFit fit_sweep(std::span<const VarianceReport> reports) {
  std::vector<double> xi, kappa, rho;
  for (const auto& r : reports) {
    if (r.kappa > 0.0 && r.rho > 0.0) {
      xi.push_back(r.xi);
      kappa.push_back(r.kappa);
      rho.push_back(r.rho);
    }
  }
  require(xi.size() >= kMinFitCells, ErrorKind::kFit,
          "power-law fit needs at least " + std::to_string(kMinFitCells) +
              " cells with positive kappa and rho, got " + std::to_string(xi.size()));
  SweepFit fit;
  fit.kappa = fit_power_law(xi, kappa);
  fit.rho = fit_power_law(xi, rho);
  fit.alpha = fit.kappa.exponent;
  fit.beta = fit.rho.exponent;
  fit.gap = fit.alpha - fit.beta;
  fit.cells_used = xi.size();
  return fit;
}

std::vector<Sequence> make_sequences(const ToyModelConfig& model, std::size_t n,
                                     const SweepOptions& opts) {
  if (opts.source == SequenceSource::kUniform)
    return random_sequences(model.vocab, n, opts.sequences, opts.seed);
  const std::size_t topic = opts.topic_size > 0 ? opts.topic_size : std::max<std::size_t>(1, model.vocab / 4);
  return topic_sequences(model.vocab, n, opts.sequences, opts.seed, topic);
}

SweepResult sweep_and_fit(const ToyModelConfig& model, std::span<const SweepCell> cells,
                          const SweepOptions& opts, const SweepProgress& progress) {
  require(!cells.empty(), ErrorKind::kArity, "sweep needs at least one cell");
  for (const auto& cell : cells) {
    require(cell.c > 0.0, ErrorKind::kDomain, "sweep cell c must be > 0");
    require(cell.n >= 2, ErrorKind::kConfig, "sweep cell n must be >= 2");
  }
  if (opts.fit) {
    require(cells.size() >= kMinFitCells, ErrorKind::kFit,
            "power-law fit needs at least " + std::to_string(kMinFitCells) + " cells");
  }
  ToyModelConfig cfg = model;
  cfg.n = cells.front().n;
  const ToyModelParams params = build_toy_model(cfg);

  std::map<std::size_t, std::vector<Sequence>> by_n;
  SweepResult result;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const SweepCell& cell = cells[i];
    auto it = by_n.find(cell.n);
    if (it == by_n.end())
      it = by_n.emplace(cell.n, make_sequences(cfg, cell.n, opts)).first;
    // Cells of equal n share sequences and mask streams; with the monotone
    // retention rule the masks of a larger c are supersets.
    EstimateOptions eo;
    eo.samples_per_sequence = opts.samples_per_sequence;
    eo.base_seed = stream_id_of(opts.seed, cell.n);
    eo.threads = opts.threads;
    result.reports.push_back(estimate_variance(params, it->second, GradMode::kSus, cell.c, eo));
    if (progress) progress(i + 1, cells.size());
  }
  if (opts.fit) result.fit = fit_sweep(result.reports);
  return result;
}

std::filesystem::path dump_attention(const ToyModelParams& params,
                                     std::span<const Sequence> sequences,
                                     const std::filesystem::path& dir,
                                     const std::string& model_name) {
  require(!sequences.empty(), ErrorKind::kArity, "attention dump needs at least one sequence");
  const auto& cfg = params.config;
  const std::size_t n = sequences.front().size();
  std::vector<std::vector<Mat>> sums(cfg.layers, std::vector<Mat>(cfg.heads, Mat(n, n)));
  for (const auto& seq : sequences) {
    require(seq.size() == n, ErrorKind::kDimension, "all sequences must share one length");
    const ForwardCache cache = model_forward(params, seq);
    for (std::size_t l = 0; l < cfg.layers; ++l)
      for (std::size_t h = 0; h < cfg.heads; ++h) sums[l][h] += cache.states[l][h].W;
  }
  dump::WeightDump d;
  d.model = model_name;
  d.n = n;
  d.layers = cfg.layers;
  d.heads = cfg.heads;
  d.sequences_averaged = sequences.size();
  const double inv = 1.0 / static_cast<double>(sequences.size());
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      dump::HeadWeights hw;
      hw.layer = l;
      hw.head = h;
      hw.W = inv * sums[l][h];
      d.entries.push_back(std::move(hw));
    }
  }
  return dump::write_weight_dump(dir, d);
}

}  // namespace sus::lab
