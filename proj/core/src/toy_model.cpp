#include "sus/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sus/error.hpp"
#include "sus/sus_backprop.hpp"

namespace sus::lab {

double ToyModelConfig::logit_scale() const {
  return tau > 0.0 ? tau : AttnInput::default_tau(d_head);
}

void ToyModelConfig::validate() const {
  require(vocab >= 1 && d_model >= 1 && heads >= 1 && d_head >= 1 && layers >= 1,
          ErrorKind::kConfig, "all model sizes must be >= 1");
  require(n >= 2, ErrorKind::kConfig, "next-token loss needs n >= 2");
  require(heads * d_head == d_model, ErrorKind::kConfig,
          "heads x d_head = " + std::to_string(heads * d_head) + " differs from d_model = " +
              std::to_string(d_model));
  require(tau >= 0.0 && std::isfinite(tau), ErrorKind::kConfig, "tau must be >= 0 (0 = default)");
}

namespace {

// P is ToyModelParams or const ToyModelParams.
template <typename P, typename F>
void for_each_matrix(P& p, F&& f) {
  f(p.embedding);
  for (auto& layer : p.layers) {
    for (auto& h : layer.heads) {
      f(h.Wq);
      f(h.Wk);
      f(h.Wv);
    }
    f(layer.Wo);
  }
  f(p.unembedding);
}

Mat gaussian(std::size_t rows, std::size_t cols, double scale, RngCursor& rng) {
  Mat m(rows, cols);
  for (double& v : m.flat()) v = scale * rng.normal();
  return m;
}

}  // namespace

std::size_t ToyModelParams::parameter_count() const {
  std::size_t count = 0;
  for_each_matrix(*this, [&](const Mat& m) { count += m.size(); });
  return count;
}

std::vector<double> ToyModelParams::to_flat() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each_matrix(*this, [&](const Mat& m) { flat.insert(flat.end(), m.flat().begin(), m.flat().end()); });
  return flat;
}

void ToyModelParams::assign_flat(std::span<const double> flat) {
  require(flat.size() == parameter_count(), ErrorKind::kDimension, "flat parameter size mismatch");
  std::size_t offset = 0;
  for_each_matrix(*this, [&](Mat& m) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), m.size(), m.flat().begin());
    offset += m.size();
  });
}

ToyModelParams build_toy_model(const ToyModelConfig& cfg) {
  cfg.validate();
  RngCursor rng(RngStream(cfg.seed, stream_id_of(0x746f79)));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  ToyModelParams p;
  p.config = cfg;
  p.embedding = gaussian(cfg.vocab, cfg.d_model, 1.0, rng);
  p.layers.resize(cfg.layers);
  for (auto& layer : p.layers) {
    layer.heads.resize(cfg.heads);
    for (auto& h : layer.heads) {
      h.Wq = gaussian(cfg.d_model, cfg.d_head, inv_sqrt_d, rng);
      h.Wk = gaussian(cfg.d_model, cfg.d_head, inv_sqrt_d, rng);
      h.Wv = gaussian(cfg.d_model, cfg.d_head, inv_sqrt_d, rng);
    }
    layer.Wo = gaussian(cfg.d_model, cfg.d_model, inv_sqrt_d, rng);
  }
  p.unembedding = gaussian(cfg.d_model, cfg.vocab, inv_sqrt_d, rng);
  return p;
}

void validate_tokens(const ToyModelConfig& cfg, std::span<const std::uint32_t> tokens) {
  require(tokens.size() >= 2, ErrorKind::kInput, "token sequence needs at least 2 tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i)
    require(tokens[i] < cfg.vocab, ErrorKind::kInput,
            "token " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                " is outside the vocabulary");
}

ForwardCache model_forward(const ToyModelParams& params, std::span<const std::uint32_t> tokens) {
  const ToyModelConfig& cfg = params.config;
  validate_tokens(cfg, tokens);
  const std::size_t n = tokens.size();
  const double tau = cfg.logit_scale();

  ForwardCache cache;
  Mat x(n, cfg.d_model);
  for (std::size_t i = 0; i < n; ++i) {
    auto e = params.embedding.row(tokens[i]);
    std::copy(e.begin(), e.end(), x.row(i).begin());
  }
  cache.residual.push_back(x);

  for (const auto& layer : params.layers) {
    const Mat& xl = cache.residual.back();
    auto& inputs = cache.inputs.emplace_back();
    auto& states = cache.states.emplace_back();
    Mat concat(n, cfg.d_model);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const auto& hp = layer.heads[h];
      AttnInput in{matmul(xl, hp.Wq), matmul(xl, hp.Wk), matmul(xl, hp.Wv), tau, true};
      AttnForwardState st = attn_forward(in);
      set_column_block(concat, h * cfg.d_head, st.Vbar);
      inputs.push_back(std::move(in));
      states.push_back(std::move(st));
    }
    cache.residual.push_back(xl + matmul(concat, layer.Wo));
    cache.concat.push_back(std::move(concat));
  }

  const Mat logits = matmul(cache.residual.back(), params.unembedding);
  cache.probs = Mat(n, cfg.vocab);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto z = logits.row(i);
    auto pr = cache.probs.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t v = 0; v < z.size(); ++v) {
      pr[v] = std::exp(z[v] - mx);
      total += pr[v];
    }
    for (double& v : pr) v /= total;
    if (i + 1 < n) loss += mx + std::log(total) - z[tokens[i + 1]];
  }
  cache.loss = loss / static_cast<double>(n - 1);
  return cache;
}

double model_loss(const ToyModelParams& params, std::span<const std::uint32_t> tokens) {
  return model_forward(params, tokens).loss;
}

ModelGrad model_backward(const ToyModelParams& params, const ForwardCache& cache,
                         std::span<const std::uint32_t> tokens, GradMode mode, double c,
                         const RngStream& rng) {
  const ToyModelConfig& cfg = params.config;
  validate_tokens(cfg, tokens);
  if (mode == GradMode::kSus)
    require(c > 0.0 && std::isfinite(c), ErrorKind::kDomain, "sus mode needs c > 0");
  const std::size_t n = tokens.size();
  require(cache.residual.size() == cfg.layers + 1 && cache.residual.front().rows() == n,
          ErrorKind::kDimension, "forward cache does not match tokens");

  ToyModelParams grad;
  grad.config = cfg;
  grad.embedding = Mat(cfg.vocab, cfg.d_model);
  grad.layers.resize(cfg.layers);

  // Cross-entropy over the n - 1 next-token predictions.
  Mat dlogits = cache.probs;
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = dlogits.row(i);
    if (i + 1 == n) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    row[tokens[i + 1]] -= 1.0;
    for (double& v : row) v *= inv;
  }
  grad.unembedding = matmul_tn(cache.residual.back(), dlogits);
  Mat dx = matmul_nt(dlogits, params.unembedding);

  ModelGrad out;
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& glayer = grad.layers[l];
    const Mat& xl = cache.residual[l];
    glayer.Wo = matmul_tn(cache.concat[l], dx);
    const Mat dconcat = matmul_nt(dx, layer.Wo);
    Mat dxl = dx;  // residual path
    glayer.heads.resize(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const auto& hp = layer.heads[h];
      const AttnInput& in = cache.inputs[l][h];
      const AttnForwardState& st = cache.states[l][h];
      const Mat dvbar = column_block(dconcat, h * cfg.d_head, cfg.d_head);
      GradTriple g;
      if (mode == GradMode::kDense) {
        g = attn_backward_dense(st, in, dvbar);
        out.nnz += n * (n + 1) / 2;
      } else {
        const MaskedWeights mask = sample_mask(st.W, c, true, rng.fork(l * cfg.heads + h));
        g = attn_backward_sparse(mask, in, st.Vbar, dvbar);
        out.nnz += mask.nnz();
      }
      out.mask_rows += n;
      auto& gh = glayer.heads[h];
      gh.Wq = matmul_tn(xl, g.dQ);
      gh.Wk = matmul_tn(xl, g.dK);
      gh.Wv = matmul_tn(xl, g.dV);
      dxl += matmul_nt(g.dQ, hp.Wq);
      dxl += matmul_nt(g.dK, hp.Wk);
      dxl += matmul_nt(g.dV, hp.Wv);
    }
    dx = std::move(dxl);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto ge = grad.embedding.row(tokens[i]);
    auto d = dx.row(i);
    for (std::size_t k = 0; k < ge.size(); ++k) ge[k] += d[k];
  }

  out.loss = cache.loss;
  out.grad = grad.to_flat();
  return out;
}

ModelGrad model_grad(const ToyModelParams& params, std::span<const std::uint32_t> tokens,
                     GradMode mode, double c, const RngStream& rng) {
  const ForwardCache cache = model_forward(params, tokens);
  return model_backward(params, cache, tokens, mode, c, rng);
}

double min_attention_weight(const ForwardCache& cache) {
  double mn = std::numeric_limits<double>::infinity();
  for (const auto& layer : cache.states)
    for (const auto& st : layer)
      for (std::size_t i = 0; i < st.W.rows(); ++i)
        for (std::size_t j = 0; j <= i; ++j) mn = std::min(mn, st.W(i, j));
  return mn;
}

std::vector<std::vector<std::uint32_t>> random_sequences(std::size_t vocab, std::size_t n,
                                                         std::size_t count, std::uint64_t seed) {
  require(vocab >= 1, ErrorKind::kConfig, "vocabulary must be non-empty");
  std::vector<std::vector<std::uint32_t>> seqs(count, std::vector<std::uint32_t>(n));
  for (std::size_t s = 0; s < count; ++s) {
    RngCursor rng(RngStream(seed, stream_id_of(0x736571, n, s)));
    for (auto& t : seqs[s]) t = static_cast<std::uint32_t>(rng.below(vocab));
  }
  return seqs;
}

std::vector<std::vector<std::uint32_t>> topic_sequences(std::size_t vocab, std::size_t n,
                                                        std::size_t count, std::uint64_t seed,
                                                        std::size_t topic_size) {
  require(topic_size >= 1 && topic_size <= vocab, ErrorKind::kConfig,
          "topic size must lie in [1, vocab]");
  std::vector<std::vector<std::uint32_t>> seqs(count, std::vector<std::uint32_t>(n));
  std::vector<std::uint32_t> perm(vocab);
  for (std::size_t s = 0; s < count; ++s) {
    RngCursor rng(RngStream(seed, stream_id_of(0x746f70, s)));
    for (std::size_t i = 0; i < vocab; ++i) perm[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < topic_size; ++i)
      std::swap(perm[i], perm[i + rng.below(vocab - i)]);
    for (auto& t : seqs[s]) t = perm[rng.below(topic_size)];
  }
  return seqs;
}

}  // namespace sus::lab
