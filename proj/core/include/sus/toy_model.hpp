#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sus/attention.hpp"
#include "sus/mat.hpp"
#include "sus/rng.hpp"

namespace sus::lab {

// Embedding -> [causal multi-head attention + residual] x layers ->
// unembedding -> next-token cross-entropy averaged over positions.
// No MLP blocks, no normalization, no positional encoding.
struct ToyModelConfig {
  std::size_t vocab = 64;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_head = 16;
  std::size_t layers = 2;
  std::size_t n = 256;
  double tau = 0.0;  // 0 selects 1/sqrt(d_head)
  std::uint64_t seed = 0;

  double logit_scale() const;
  void validate() const;
};

struct HeadParams {
  Mat Wq;  // d_model x d_head
  Mat Wk;
  Mat Wv;
};

struct LayerParams {
  std::vector<HeadParams> heads;
  Mat Wo;  // d_model x d_model
};

struct ToyModelParams {
  ToyModelConfig config;
  Mat embedding;  // vocab x d_model
  std::vector<LayerParams> layers;
  Mat unembedding;  // d_model x vocab

  std::size_t parameter_count() const;
  // Flat order: embedding, per layer (per head Wq, Wk, Wv, then Wo), unembedding.
  std::vector<double> to_flat() const;
  void assign_flat(std::span<const double> flat);
};

// Gaussian init with std 1/sqrt(fan_in); the embedding (one-hot input) uses std 1.
ToyModelParams build_toy_model(const ToyModelConfig& cfg);

enum class GradMode { kDense, kSus };

struct ForwardCache {
  std::vector<Mat> residual;  // X_0 .. X_L, each n x d_model
  std::vector<std::vector<AttnInput>> inputs;        // [layer][head]
  std::vector<std::vector<AttnForwardState>> states;  // [layer][head]
  std::vector<Mat> concat;  // per layer, n x d_model
  Mat probs;                // n x vocab softmax of the logits
  double loss = 0.0;
};

struct ModelGrad {
  double loss = 0.0;
  std::vector<double> grad;  // flat, same order as ToyModelParams::to_flat
  std::size_t nnz = 0;        // retained attention entries over all heads and layers
  std::size_t mask_rows = 0;  // attention rows over all heads and layers
};

void validate_tokens(const ToyModelConfig& cfg, std::span<const std::uint32_t> tokens);

ForwardCache model_forward(const ToyModelParams& params, std::span<const std::uint32_t> tokens);
double model_loss(const ToyModelParams& params, std::span<const std::uint32_t> tokens);

// Backward through the stack. In kSus mode every (layer, head) draws a fresh
// mask from rng.fork(layer * heads + head).
ModelGrad model_backward(const ToyModelParams& params, const ForwardCache& cache,
                         std::span<const std::uint32_t> tokens, GradMode mode, double c,
                         const RngStream& rng);

ModelGrad model_grad(const ToyModelParams& params, std::span<const std::uint32_t> tokens,
                     GradMode mode, double c, const RngStream& rng);

// Smallest allowed attention weight over all heads and layers.
double min_attention_weight(const ForwardCache& cache);

// Uniform random token sequences.
std::vector<std::vector<std::uint32_t>> random_sequences(std::size_t vocab, std::size_t n,
                                                         std::size_t count, std::uint64_t seed);

// Each sequence draws a random subset of topic_size tokens and samples
// uniformly from it. Sequence s at length n is a prefix of sequence s at any
// longer length.
std::vector<std::vector<std::uint32_t>> topic_sequences(std::size_t vocab, std::size_t n,
                                                        std::size_t count, std::uint64_t seed,
                                                        std::size_t topic_size);

}  // namespace sus::lab
