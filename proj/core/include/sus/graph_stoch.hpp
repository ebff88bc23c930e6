#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sus/rng.hpp"

namespace sus::graph {

using NodeId = std::size_t;

using NodeFn = std::function<double(std::span<const double>)>;
// Partials of a node with respect to each of its parents, in parent order.
using NodeGradFn = std::function<std::vector<double>(std::span<const double>)>;

struct Edge {
  NodeId from;
  NodeId to;
  std::size_t slot;  // position of `from` in the parent list of `to`
};

// Scalar computation graph. Nodes are appended in topological order: a node
// can only name parents that already exist, so the graph is acyclic by
// construction and node ids are a valid topological order.
class DagGraph {
 public:
  NodeId add_input(std::string name = {});
  NodeId add_node(std::vector<NodeId> parents, NodeFn fn, NodeGradFn grad, std::string name = {});

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t input_count() const noexcept { return inputs_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<NodeId>& parents(NodeId id) const;
  const std::string& name(NodeId id) const;
  bool is_input(NodeId id) const;

  // Values of every node; `inputs` are assigned to input nodes in creation order.
  std::vector<double> forward(std::span<const double> inputs) const;
  // Partial derivative on every edge at the given forward values, indexed like edges().
  std::vector<double> edge_partials(std::span<const double> values) const;

 private:
  struct Node {
    std::vector<NodeId> parents;
    std::vector<std::size_t> in_edges;
    NodeFn fn;
    NodeGradFn grad;
    std::string name;
    bool input = false;
  };

  void check(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> inputs_;
  std::vector<Edge> edges_;
};

// Acceptance probability per mask variable and the variable that scales each
// edge. The default assigns one independent variable to every edge. Sharing
// a variable between edges models a coupling; it stays unbiased only when no
// path uses two edges of the same variable.
struct EdgeMaskPolicy {
  std::vector<double> q;
  std::vector<std::size_t> variable_of_edge;

  static EdgeMaskPolicy independent(std::size_t edge_count, double q);
  static EdgeMaskPolicy independent(std::vector<double> q_per_edge);

  std::size_t variable_count() const noexcept { return q.size(); }
  void validate(std::size_t edge_count) const;
};

inline constexpr std::size_t kMaxEnumeratedEdges = 20;

// Sum over all source->sink paths of the product of edge partials.
double path_sum_derivative(const DagGraph& g, NodeId source, NodeId sink,
                           std::span<const double> inputs);

// Path sum with every edge partial scaled by per-edge weights (mask values).
double weighted_path_sum(const DagGraph& g, NodeId source, NodeId sink,
                         std::span<const double> edge_partials,
                         std::span<const double> edge_weights);

// One sample of the masked path sum; each mask variable is drawn once per call.
double stochastic_backprop(const DagGraph& g, const EdgeMaskPolicy& policy, NodeId source,
                           NodeId sink, std::span<const double> inputs, const RngStream& rng);

// Expectation of stochastic_backprop by enumerating every mask configuration.
double exact_mask_expectation(const DagGraph& g, const EdgeMaskPolicy& policy, NodeId source,
                              NodeId sink, std::span<const double> inputs);

// Small graphs shared by the oracles, the CLI demo and the acceptance suite.
struct GraphCase {
  std::string name;
  DagGraph graph;
  NodeId source = 0;
  NodeId sink = 0;
  std::vector<double> inputs;
};

// x -> g = x^2 + 1 -> h = sin(g), evaluated at x = 0.7.
GraphCase chain_case();
// a = 2x, b = 3x, y = a b at x = 1; dy/dx = 12.
GraphCase diamond_case();
// Node i > 0 takes node i-1 plus a random subset of earlier nodes as parents
// and computes sum_k a_k p_k + b prod_k p_k with random coefficients.
GraphCase random_dag_case(std::size_t nodes, std::uint64_t seed);

// One variable shared by every edge: biased as soon as a path has 2 edges.
EdgeMaskPolicy shared_variable_policy(std::size_t edge_count, double q);

}  // namespace sus::graph
