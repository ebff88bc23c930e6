#include <benchmark/benchmark.h>

#include "sus/attention.hpp"
#include "sus/sus_backprop.hpp"

namespace {

constexpr std::size_t kD = 32;

struct Problem {
  sus::AttnInput input;
  sus::AttnForwardState state;
  sus::Mat dVbar;
};

sus::Mat normal_mat(std::size_t rows, std::size_t cols, sus::RngCursor& rng) {
  sus::Mat m(rows, cols);
  for (double& v : m.flat()) v = rng.normal();
  return m;
}

Problem make_problem(std::size_t n) {
  sus::RngCursor rng(sus::RngStream(1, n));
  Problem p{{normal_mat(n, kD, rng), normal_mat(n, kD, rng), normal_mat(n, kD, rng),
             sus::AttnInput::default_tau(kD), true},
            {},
            normal_mat(n, kD, rng)};
  p.state = sus::attn_forward(p.input);
  return p;
}

void BM_DenseBackward(benchmark::State& st) {
  const Problem p = make_problem(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sus::attn_backward_dense(p.state, p.input, p.dVbar));
  st.SetComplexityN(st.range(0));
}

void BM_SparseBackward(benchmark::State& st) {
  const Problem p = make_problem(static_cast<std::size_t>(st.range(0)));
  const double c = static_cast<double>(st.range(1));
  const sus::MaskedWeights mask = sus::sample_mask(p.state.W, c, true, sus::RngStream(2, 0));
  for (auto _ : st)
    benchmark::DoNotOptimize(sus::attn_backward_sparse(mask, p.input, p.state.Vbar, p.dVbar));
  st.counters["nnz"] = static_cast<double>(mask.nnz());
  st.SetComplexityN(st.range(0));
}

void BM_SampleMask(benchmark::State& st) {
  const Problem p = make_problem(static_cast<std::size_t>(st.range(0)));
  std::uint64_t k = 0;
  for (auto _ : st)
    benchmark::DoNotOptimize(sus::sample_mask(p.state.W, 16.0, true, sus::RngStream(3, k++)));
}

}  // namespace

BENCHMARK(BM_DenseBackward)->RangeMultiplier(2)->Range(128, 1024)->Complexity();
BENCHMARK(BM_SparseBackward)->ArgsProduct({{128, 256, 512, 1024}, {8, 16, 32}});
BENCHMARK(BM_SampleMask)->RangeMultiplier(2)->Range(128, 1024);
BENCHMARK_MAIN();
