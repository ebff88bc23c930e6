#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sus/toy_model.hpp"
#include "sus/variance_lab.hpp"

namespace sus::cli {

// Inconsistent flags detected after parsing; reported like a parse error.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::uint64_t seed = 0;
  std::string output;
  std::string format = "csv";
  std::size_t threads = 0;
};

struct ModelOptions {
  std::size_t vocab = 64;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t d_head = 0;  // 0 = d_model / heads
  std::size_t layers = 2;
  double tau = 0.0;
  std::string data = "uniform";
  std::size_t topic_size = 0;
};

struct GradcheckOptions {
  std::size_t n = 8;
  std::size_t d = 4;
  double tau = 0.0;
  bool non_causal = false;
  double c = 1.2;
  bool enumerate = false;
};

struct SweepCliOptions {
  std::string mode = "c";
  std::vector<double> c{4, 8, 16, 32, 64};
  std::vector<std::size_t> n{256};
  std::size_t sequences = 64;
  std::size_t samples = 4;
  std::string fit = "auto";
  bool progress = false;
};

struct SpreadOptions {
  std::string manifest;
  std::size_t n = 128;
  std::size_t sequences = 8;
  double p = 0.9;
  long long ref_position = -1;  // -1 = n - 1
};

struct KweightOptions {
  std::string input;
  bool generate = false;
  double theta_minus = 0.086;
  double theta_plus = 2.08;
  std::size_t n = 2000;
  std::vector<double> xi;
};

struct GraphDemoOptions {
  double q = 0.5;
  std::size_t samples = 100000;
  std::size_t nodes = 6;
};

lab::ToyModelConfig toy_config(const ModelOptions& m, std::uint64_t seed, std::size_t n);
lab::SequenceSource sequence_source(const ModelOptions& m);

int run_gradcheck(const CommonOptions& common, const GradcheckOptions& opts);
int run_sweep(const CommonOptions& common, const ModelOptions& model, const SweepCliOptions& opts);
int run_spread(const CommonOptions& common, const ModelOptions& model, const SpreadOptions& opts);
int run_kweight(const CommonOptions& common, const KweightOptions& opts);
int run_graph_demo(const CommonOptions& common, const GraphDemoOptions& opts);

}  // namespace sus::cli
