#include "commands.hpp"

namespace sus::cli {

lab::ToyModelConfig toy_config(const ModelOptions& m, std::uint64_t seed, std::size_t n) {
  lab::ToyModelConfig cfg;
  cfg.vocab = m.vocab;
  cfg.d_model = m.d_model;
  cfg.heads = m.heads;
  cfg.d_head = m.d_head > 0 ? m.d_head : (m.heads > 0 ? m.d_model / m.heads : 0);
  cfg.layers = m.layers;
  cfg.n = n;
  cfg.tau = m.tau;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

lab::SequenceSource sequence_source(const ModelOptions& m) {
  return m.data == "topic" ? lab::SequenceSource::kTopic : lab::SequenceSource::kUniform;
}

}  // namespace sus::cli
