#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "sus/numerics.hpp"
#include "sus/variance_lab.hpp"
#include "sus/weight_dump.hpp"
#include "test_util.hpp"

namespace sus::lab {
namespace {

ToyModelConfig small() {
  ToyModelConfig cfg;
  cfg.vocab = 12;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.d_head = 4;
  cfg.layers = 1;
  cfg.n = 12;
  cfg.seed = 2;
  return cfg;
}

EstimateOptions opts(std::uint64_t seed, std::size_t k = 4, std::size_t threads = 1) {
  EstimateOptions o;
  o.samples_per_sequence = k;
  o.base_seed = seed;
  o.threads = threads;
  return o;
}

TEST(Variance, MatchesDirectComputation) {
  const ToyModelParams p = build_toy_model(small());
  const auto seqs = random_sequences(12, 12, 6, 3);
  const double c = 2.0;
  const EstimateOptions o = opts(17, 3);
  const VarianceReport r = estimate_variance(p, seqs, GradMode::kSus, c, o);

  std::vector<std::vector<double>> dense, means;
  double within = 0.0, retained = 0.0;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    dense.push_back(model_grad(p, seqs[s], GradMode::kDense, c, RngStream(0, 0)).grad);
    std::vector<std::vector<double>> group;
    for (std::size_t k = 0; k < 3; ++k) {
      const ModelGrad g = model_grad(p, seqs[s], GradMode::kSus, c, RngStream(17, stream_id_of(s, k)));
      retained += double(g.nnz) / double(g.mask_rows);
      group.push_back(g.grad);
    }
    std::vector<double> m(group[0].size(), 0.0);
    for (const auto& g : group)
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += g[i] / 3.0;
    means.push_back(m);
    within += mean_component_variance(group);
  }
  const double sigma0 = mean_component_variance(dense);
  const double sigma = mean_component_variance(means) + (2.0 / 3.0) * within / 6.0;
  EXPECT_NEAR(r.sigma0, sigma0, 1e-10 * sigma0);
  EXPECT_NEAR(r.sigma, sigma, 1e-10 * sigma);
  EXPECT_NEAR(r.rho, (sigma - sigma0) / sigma0, 1e-8);
  EXPECT_NEAR(r.kappa, retained / 18.0 / 12.0, 1e-14);
  EXPECT_DOUBLE_EQ(r.xi, c / 12.0);
  EXPECT_EQ(r.sequences, 6u);
  EXPECT_EQ(r.samples_per_sequence, 3u);
  EXPECT_GT(r.rho_se, 0.0);
  EXPECT_GT(r.kappa_se, 0.0);
}

TEST(Variance, DenseModeHasNoExtraVariance) {
  const ToyModelParams p = build_toy_model(small());
  const auto seqs = random_sequences(12, 12, 5, 4);
  const VarianceReport r = estimate_variance(p, seqs, GradMode::kDense, 0.0, opts(1));
  EXPECT_NEAR(r.rho, 0.0, 1e-12);
  EXPECT_NEAR(r.kappa, 6.5 / 12.0, 1e-14);  // all (i+1) entries of row i
}

TEST(Variance, RepeatedSequenceHasZeroSigma0) {
  const ToyModelParams p = build_toy_model(small());
  const std::vector<Sequence> seqs(4, random_sequences(12, 12, 1, 5)[0]);
  const VarianceReport r = estimate_variance(p, seqs, GradMode::kSus, 2.0, opts(2));
  EXPECT_EQ(r.sigma0, 0.0);
  EXPECT_EQ(r.rho, 0.0);
  EXPECT_GT(r.sigma, 0.0);
}

TEST(Variance, RhoNonNegativeWithinError) {
  ToyModelConfig cfg = small();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const ToyModelParams p = build_toy_model(cfg);
    const auto seqs = random_sequences(12, 12, 8, 100 + seed);
    const VarianceReport r = estimate_variance(p, seqs, GradMode::kSus, 1.5, opts(seed));
    EXPECT_GE(r.rho, -3.0 * r.rho_se) << seed;
    EXPECT_LE(r.kappa * 12.0, 1.5 + 3.0 * r.kappa_se * 12.0) << seed;
  }
}

TEST(Variance, ThreadCountDoesNotChangeResults) {
  const ToyModelParams p = build_toy_model(small());
  const auto seqs = random_sequences(12, 12, 7, 6);
  const VarianceReport a = estimate_variance(p, seqs, GradMode::kSus, 3.0, opts(9, 4, 1));
  const VarianceReport b = estimate_variance(p, seqs, GradMode::kSus, 3.0, opts(9, 4, 3));
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.sigma0, b.sigma0);
  EXPECT_EQ(a.rho_se, b.rho_se);
  EXPECT_EQ(a.kappa, b.kappa);
}

TEST(Variance, Errors) {
  const ToyModelParams p = build_toy_model(small());
  const auto seqs = random_sequences(12, 12, 3, 7);
  EXPECT_SUS_ERROR(estimate_variance(p, std::span(seqs).first(1), GradMode::kSus, 2.0, opts(0)),
                   ErrorKind::kArity);
  EXPECT_SUS_ERROR(estimate_variance(p, seqs, GradMode::kSus, 2.0, opts(0, 0)), ErrorKind::kArity);
  EXPECT_SUS_ERROR(estimate_variance(p, seqs, GradMode::kSus, 0.0, opts(0)), ErrorKind::kDomain);
  std::vector<Sequence> ragged = seqs;
  ragged[1].pop_back();
  EXPECT_SUS_ERROR(estimate_variance(p, ragged, GradMode::kSus, 2.0, opts(0)), ErrorKind::kDimension);
  std::vector<Sequence> bad = seqs;
  bad[2][0] = 40;
  EXPECT_SUS_ERROR(estimate_variance(p, bad, GradMode::kSus, 2.0, opts(0)), ErrorKind::kInput);
}

SweepOptions sweep_opts(bool fit) {
  SweepOptions o;
  o.sequences = 6;
  o.samples_per_sequence = 2;
  o.seed = 4;
  o.fit = fit;
  o.threads = 1;
  return o;
}

TEST(Sweep, SingleCellWithoutFit) {
  const std::vector<SweepCell> cells{{2.0, 12}};
  std::size_t calls = 0;
  const SweepResult r = sweep_and_fit(small(), cells, sweep_opts(false), [&](std::size_t done, std::size_t total) {
    ++calls;
    EXPECT_EQ(done, 1u);
    EXPECT_EQ(total, 1u);
  });
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_FALSE(r.fit.has_value());
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(r.reports[0].n, 12u);
}

TEST(Sweep, FitNeedsFourCells) {
  const std::vector<SweepCell> cells{{1.0, 12}, {2.0, 12}, {4.0, 12}};
  EXPECT_SUS_ERROR(sweep_and_fit(small(), cells, sweep_opts(true)), ErrorKind::kFit);
  std::vector<VarianceReport> reports(5);
  for (std::size_t i = 0; i < 5; ++i) {
    reports[i].xi = 0.1 * double(i + 1);
    reports[i].kappa = 0.1;
    reports[i].rho = i < 2 ? 0.5 : 0.0;
  }
  EXPECT_SUS_ERROR(fit_sweep(reports), ErrorKind::kFit);
}

TEST(Sweep, FitRecoversPowerLaws) {
  std::vector<VarianceReport> reports;
  for (double xi : {0.01, 0.02, 0.05, 0.1, 0.3}) {
    VarianceReport r;
    r.xi = xi;
    r.kappa = 0.7 * std::pow(xi, 0.8);
    r.rho = 0.02 * std::pow(xi, -1.5);
    reports.push_back(r);
  }
  const SweepFit fit = fit_sweep(reports);
  EXPECT_NEAR(fit.alpha, 0.8, 1e-12);
  EXPECT_NEAR(fit.beta, -1.5, 1e-12);
  EXPECT_NEAR(fit.gap, 2.3, 1e-12);
  EXPECT_EQ(fit.cells_used, 5u);
}

TEST(Sweep, CellsOfEqualLengthShareMasks) {
  // the retention rule is monotone in c, so a larger c cannot keep fewer entries
  const std::vector<SweepCell> cells{{1.0, 12}, {2.0, 12}, {4.0, 12}, {8.0, 12}};
  const SweepResult r = sweep_and_fit(small(), cells, sweep_opts(true));
  ASSERT_TRUE(r.fit.has_value());
  for (std::size_t i = 1; i < r.reports.size(); ++i) {
    EXPECT_GE(r.reports[i].kappa, r.reports[i - 1].kappa);
    EXPECT_LT(r.reports[i].rho, r.reports[i - 1].rho);
  }
  const SweepResult again = sweep_and_fit(small(), cells, sweep_opts(true));
  for (std::size_t i = 0; i < r.reports.size(); ++i) EXPECT_EQ(again.reports[i].sigma, r.reports[i].sigma);
}

TEST(Sweep, TopicSource) {
  SweepOptions o = sweep_opts(false);
  o.source = SequenceSource::kTopic;
  o.topic_size = 3;
  const auto seqs = make_sequences(small(), 20, o);
  ASSERT_EQ(seqs.size(), 6u);
  for (const auto& s : seqs) {
    std::vector<std::uint32_t> d(s);
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    EXPECT_LE(d.size(), 3u);
  }
  o.source = SequenceSource::kUniform;
  EXPECT_EQ(make_sequences(small(), 20, o), random_sequences(12, 20, 6, 4));
}

TEST(Dump, AveragesAttentionOverSequences) {
  const ToyModelParams p = build_toy_model(small());
  const auto seqs = random_sequences(12, 12, 3, 8);
  const auto dir = std::filesystem::temp_directory_path() / "sus_lab_dump";
  std::filesystem::remove_all(dir);
  const auto manifest = dump_attention(p, seqs, dir, "small");
  const dump::WeightDump d = dump::load_weight_dump(manifest);
  EXPECT_EQ(d.model, "small");
  EXPECT_EQ(d.sequences_averaged, 3u);
  ASSERT_EQ(d.entries.size(), 2u);
  std::vector<ForwardCache> caches;
  for (const auto& s : seqs) caches.push_back(model_forward(p, s));
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double mean = 0.0;
        for (const auto& c : caches) mean += c.states[0][h].W(i, j) / 3.0;
        EXPECT_NEAR(d.at(0, h).W(i, j), mean, 1e-6);
      }
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_SUS_ERROR(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 5) fail(ErrorKind::kInput, "boom");
                   }),
                   ErrorKind::kInput);
}

}  // namespace
}  // namespace sus::lab
