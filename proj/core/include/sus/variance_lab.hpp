#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sus/numerics.hpp"
#include "sus/toy_model.hpp"

namespace sus::lab {

using Sequence = std::vector<std::uint32_t>;

struct VarianceReport {
  double c = 0.0;
  std::size_t n = 0;
  double xi = 0.0;
  double sigma = 0.0;
  double sigma0 = 0.0;
  double rho = 0.0;
  double kappa = 0.0;
  double sigma_se = 0.0;
  double sigma0_se = 0.0;
  double rho_se = 0.0;
  double kappa_se = 0.0;
  double nnz_mean = 0.0;  // mean retained entries per (layer, head) mask
  std::size_t sequences = 0;
  std::size_t samples_per_sequence = 0;
};

struct EstimateOptions {
  std::size_t samples_per_sequence = 4;
  std::uint64_t base_seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

// Sigma0: variance of dense per-sequence gradients. Sigma: variance of
// `mode` gradients over all (sequence, mask sample) pairs; the mask stream of
// pair (s, k) is RngStream(base_seed, stream_id_of(s, k)). Standard errors
// are jackknife estimates over sequences. Results do not depend on `threads`.
VarianceReport estimate_variance(const ToyModelParams& params, std::span<const Sequence> sequences,
                                 GradMode mode, double c, const EstimateOptions& opts);

struct SweepCell {
  double c = 0.0;
  std::size_t n = 0;
};

enum class SequenceSource { kUniform, kTopic };

struct SweepOptions {
  SequenceSource source = SequenceSource::kUniform;
  std::size_t topic_size = 0;  // 0 selects vocab / 4
  std::size_t sequences = 64;
  std::size_t samples_per_sequence = 4;
  std::uint64_t seed = 0;
  bool fit = false;
  std::size_t threads = 0;
};

struct SweepFit {
  PowerLawFit kappa;  // kappa ~ xi^alpha
  PowerLawFit rho;    // rho ~ xi^beta
  double alpha = 0.0;
  double beta = 0.0;
  double gap = 0.0;  // alpha - beta
  std::size_t cells_used = 0;
};

struct SweepResult {
  std::vector<VarianceReport> reports;  // in cell order
  std::optional<SweepFit> fit;
};

inline constexpr std::size_t kMinFitCells = 4;

using SweepProgress = std::function<void(std::size_t done, std::size_t total)>;

// Model parameters come from `model` (its n is ignored); every cell draws
// `sequences` random token sequences of length cell.n, shared by all cells of
// equal n. Fit errors (fewer than 4 cells with positive kappa and rho) throw.
SweepResult sweep_and_fit(const ToyModelConfig& model, std::span<const SweepCell> cells,
                          const SweepOptions& opts, const SweepProgress& progress = {});

std::vector<Sequence> make_sequences(const ToyModelConfig& model, std::size_t n,
                                     const SweepOptions& opts);

SweepFit fit_sweep(std::span<const VarianceReport> reports);

// Per-(layer, head) attention weights averaged over sequences, written in the
// weight-dump format. Returns the manifest path.
std::filesystem::path dump_attention(const ToyModelParams& params,
                                     std::span<const Sequence> sequences,
                                     const std::filesystem::path& dir,
                                     const std::string& model_name = "toy");

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace sus::lab
