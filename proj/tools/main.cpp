#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace sus::cli;

namespace {

void add_common(CLI::App* app, CommonOptions& common) {
  app->add_option("--seed", common.seed, "Seed for every random draw");
  app->add_option("-o,--output", common.output, "Output path");
  app->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--threads", common.threads, "Worker threads (0 = all cores)");
}

void add_model(CLI::App* app, ModelOptions& m) {
  app->add_option("--vocab", m.vocab, "Vocabulary size");
  app->add_option("--d-model", m.d_model, "Model width");
  app->add_option("--heads", m.heads, "Heads per layer");
  app->add_option("--d-head", m.d_head, "Head width (0 = d-model / heads)");
  app->add_option("--layers", m.layers, "Attention layers");
  app->add_option("--tau", m.tau, "Logit scale (0 = 1/sqrt(d-head))");
  app->add_option("--data", m.data, "Token source")->check(CLI::IsMember({"uniform", "topic"}));
  app->add_option("--topic-size", m.topic_size, "Tokens per topic (0 = vocab / 4)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse unbiased stochastic backprop through attention"};
  app.require_subcommand(1);

  CommonOptions common;
  ModelOptions model;
  GradcheckOptions grad;
  SweepCliOptions sweep;
  SpreadOptions spread;
  KweightOptions kw;
  GraphDemoOptions graph;

  auto* gc = app.add_subcommand("gradcheck", "Dense backward vs finite differences, sparse vs dense");
  add_common(gc, common);
  gc->add_option("--n", grad.n, "Sequence length");
  gc->add_option("--d", grad.d, "Head width");
  gc->add_option("--tau", grad.tau, "Logit scale (0 = 1/sqrt(d))");
  gc->add_flag("--non-causal", grad.non_causal, "Disable the causal mask");
  gc->add_option("--c", grad.c, "Retention parameter for --enumerate");
  gc->add_flag("--enumerate", grad.enumerate, "Exact expectation over all masks");

  auto* sw = app.add_subcommand("sweep", "Variance sweep over c or n on the toy model");
  add_common(sw, common);
  add_model(sw, model);
  sw->add_option("--mode", sweep.mode, "Swept variable")->check(CLI::IsMember({"c", "n"}));
  sw->add_option("--c", sweep.c, "Retention parameter(s)")->delimiter(',');
  sw->add_option("--n", sweep.n, "Sequence length(s)")->delimiter(',');
  sw->add_option("--sequences", sweep.sequences, "Sequences per cell");
  sw->add_option("--samples", sweep.samples, "Mask samples per sequence");
  sw->add_option("--fit", sweep.fit, "Power-law fit")->check(CLI::IsMember({"auto", "on", "off"}));
  sw->add_flag("--progress", sweep.progress, "Report finished cells on stderr");

  auto* sp = app.add_subcommand("spread", "Attention spread statistics from a dump or the toy model");
  add_common(sp, common);
  add_model(sp, model);
  sp->add_option("--manifest", spread.manifest, "Weight-dump manifest");
  sp->add_option("--n", spread.n, "Toy-model sequence length");
  sp->add_option("--sequences", spread.sequences, "Toy-model sequences to average");
  sp->add_option("--p", spread.p, "Top-p mass threshold");
  sp->add_option("--ref-position", spread.ref_position, "Position for head statistics (default n-1)");

  auto* kwc = app.add_subcommand("kweight", "Two-weight model: fit a sweep CSV or generate one");
  add_common(kwc, common);
  kwc->add_option("--input", kw.input, "Sweep CSV to fit");
  kwc->add_flag("--generate", kw.generate, "Write model curves in sweep CSV format");
  kwc->add_option("--theta-minus", kw.theta_minus, "Generator theta-");
  kwc->add_option("--theta-plus", kw.theta_plus, "Generator theta+");
  kwc->add_option("--n", kw.n, "n column of generated rows");
  kwc->add_option("--xi", kw.xi, "Generated xi values")->delimiter(',');

  auto* gd = app.add_subcommand("graph-demo", "Path-sum and mask-expectation oracles on small graphs");
  add_common(gd, common);
  gd->add_option("--q", graph.q, "Acceptance probability on every edge");
  gd->add_option("--samples", graph.samples, "Monte Carlo samples");
  gd->add_option("--nodes", graph.nodes, "Nodes of the random DAG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    std::cout << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (gc->parsed()) return run_gradcheck(common, grad);
    if (sw->parsed()) return run_sweep(common, model, sweep);
    if (sp->parsed()) return run_spread(common, model, spread);
    if (kwc->parsed()) return run_kweight(common, kw);
    if (gd->parsed()) return run_graph_demo(common, graph);
  } catch (const UsageError& e) {
    const auto subs = app.get_subcommands();
    std::cerr << "error: " << e.what() << "\n\n" << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
